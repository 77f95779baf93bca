#include "unsee/architectures/projector.hpp"

#include <cmath>
#include <string>

#include "unsee/error.hpp"
#include "unsee/numerics/kernels.hpp"

namespace unsee {

ProjectorParams init_projector(const ProjectorShape& shape, RngStream& rng) {
  require(shape.depth >= 1 && shape.depth <= 4, ErrorKind::InvalidArgument,
          "projector depth must be in 1..4, got " + std::to_string(shape.depth));
  ProjectorParams proj;
  std::size_t in = shape.in_dim;
  for (std::size_t l = 0; l < shape.depth; ++l) {
    const bool last = l + 1 == shape.depth;
    const std::size_t out = last ? shape.out_dim : shape.hidden_dim;
    ProjectorLayer layer;
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    layer.weight = Matrix(out, in);
    for (double& v : layer.weight.values()) v = bound * (2.0 * rng.uniform() - 1.0);
    layer.bias = Matrix(1, out);
    for (double& v : layer.bias.values()) v = bound * (2.0 * rng.uniform() - 1.0);
    layer.norm_act = !last;
    if (layer.norm_act) {
      layer.bn_scale = Matrix::filled(1, out, 1.0);
      layer.bn_shift = Matrix(1, out);
      layer.running_mean = Matrix(1, out);
      layer.running_var = Matrix::filled(1, out, 1.0);
    }
    proj.layers.push_back(std::move(layer));
    in = out;
  }
  return proj;
}

void validate(const ProjectorParams& proj) {
  require(proj.depth() >= 1 && proj.depth() <= 4, ErrorKind::InvalidArgument,
          "projector depth must be in 1..4, got " + std::to_string(proj.depth()));
  for (std::size_t l = 0; l < proj.depth(); ++l) {
    const auto& layer = proj.layers[l];
    const std::string where = "projector layer " + std::to_string(l);
    const std::size_t out = layer.out_dim();
    require(layer.bias.rows() == 1 && layer.bias.cols() == out, ErrorKind::ShapeMismatch,
            where + ": bias shape");
    if (l > 0)
      require(layer.in_dim() == proj.layers[l - 1].out_dim(), ErrorKind::ShapeMismatch,
              where + ": input dim does not chain with the previous layer");
    const bool last = l + 1 == proj.depth();
    require(layer.norm_act == !last, ErrorKind::InvalidArgument,
            where + (last ? ": final layer must be affine only" : ": hidden layer needs batch-norm"));
    if (layer.norm_act) {
      for (const Matrix* m : {&layer.bn_scale, &layer.bn_shift, &layer.running_mean, &layer.running_var})
        require(m->rows() == 1 && m->cols() == out, ErrorKind::ShapeMismatch,
                where + ": batch-norm tensor shape");
    }
  }
}

MlpResult mlp_forward(const ProjectorParams& proj, const Matrix& z, Mode mode) {
  require(!proj.layers.empty(), ErrorKind::InvalidArgument, "mlp_forward: empty projector");
  require(z.cols() == proj.in_dim(), ErrorKind::ShapeMismatch,
          "mlp_forward: input has " + std::to_string(z.cols()) + " columns, projector expects " +
              std::to_string(proj.in_dim()));
  if (mode == Mode::Train && proj.depth() > 1)
    require(z.rows() >= 2, ErrorKind::DegenerateBatch,
            "mlp_forward: batch-norm in train mode needs at least 2 rows");

  MlpResult res;
  res.context.mode = mode;
  Matrix x = z;
  const std::size_t b = z.rows();
  for (const auto& layer : proj.layers) {
    LayerContext ctx;
    ctx.input = x;
    Matrix y = kernels::matmul_nt(x, layer.weight);
    for (std::size_t r = 0; r < b; ++r)
      for (std::size_t j = 0; j < y.cols(); ++j) y(r, j) += layer.bias(0, j);

    if (layer.norm_act) {
      const std::size_t n = y.cols();
      ctx.batch_mean = kernels::column_means(y);
      ctx.batch_var.assign(n, 0.0);
      for (std::size_t j = 0; j < n; ++j) {
        double s = 0.0;
        for (std::size_t r = 0; r < b; ++r) {
          const double c = y(r, j) - ctx.batch_mean[j];
          s += c * c;
        }
        ctx.batch_var[j] = s / static_cast<double>(b);
      }
      ctx.inv_std.resize(n);
      ctx.normalized = Matrix(b, n);
      for (std::size_t j = 0; j < n; ++j) {
        const double mean = mode == Mode::Train ? ctx.batch_mean[j] : layer.running_mean(0, j);
        const double var = mode == Mode::Train ? ctx.batch_var[j] : layer.running_var(0, j);
        ctx.inv_std[j] = 1.0 / std::sqrt(var + proj.bn_eps);
        for (std::size_t r = 0; r < b; ++r) {
          const double xh = (y(r, j) - mean) * ctx.inv_std[j];
          ctx.normalized(r, j) = xh;
          y(r, j) = std::max(0.0, layer.bn_scale(0, j) * xh + layer.bn_shift(0, j));
        }
      }
    }
    ctx.activated = y;
    x = std::move(y);
    res.context.layers.push_back(std::move(ctx));
  }
  res.output = std::move(x);
  return res;
}

ProjectorGrads ProjectorGrads::zeros_like(const ProjectorParams& proj) {
  ProjectorGrads g;
  for (const auto& layer : proj.layers) {
    g.layers.push_back({Matrix(layer.weight.rows(), layer.weight.cols()),
                        Matrix(layer.bias.rows(), layer.bias.cols()),
                        Matrix(layer.bn_scale.rows(), layer.bn_scale.cols()),
                        Matrix(layer.bn_shift.rows(), layer.bn_shift.cols())});
  }
  return g;
}

ProjectorGrads& ProjectorGrads::operator+=(const ProjectorGrads& other) {
  require(layers.size() == other.layers.size(), ErrorKind::ShapeMismatch,
          "projector gradients with different depths");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    layers[l].weight += other.layers[l].weight;
    layers[l].bias += other.layers[l].bias;
    layers[l].bn_scale += other.layers[l].bn_scale;
    layers[l].bn_shift += other.layers[l].bn_shift;
  }
  return *this;
}

MlpBackward mlp_backward(const ProjectorParams& proj, const MlpContext& context,
                         const Matrix& grad_output) {
  require(context.layers.size() == proj.depth(), ErrorKind::ShapeMismatch,
          "mlp_backward: context depth does not match projector");
  require(grad_output.same_shape(context.layers.back().activated), ErrorKind::ShapeMismatch,
          "mlp_backward: gradient shape does not match the forward output");
  MlpBackward out{ProjectorGrads::zeros_like(proj), Matrix()};
  Matrix g = grad_output;
  for (std::size_t li = proj.depth(); li-- > 0;) {
    const auto& layer = proj.layers[li];
    const auto& ctx = context.layers[li];
    auto& lg = out.grads.layers[li];
    const std::size_t b = g.rows();
    const std::size_t n = g.cols();

    if (layer.norm_act) {
      Matrix dxhat(b, n);
      for (std::size_t r = 0; r < b; ++r)
        for (std::size_t j = 0; j < n; ++j) {
          const double gbn = ctx.activated(r, j) > 0.0 ? g(r, j) : 0.0;
          lg.bn_scale(0, j) += gbn * ctx.normalized(r, j);
          lg.bn_shift(0, j) += gbn;
          dxhat(r, j) = gbn * layer.bn_scale(0, j);
        }
      if (context.mode == Mode::Train) {
        const double bb = static_cast<double>(b);
        for (std::size_t j = 0; j < n; ++j) {
          double sum = 0.0, sum_xh = 0.0;
          for (std::size_t r = 0; r < b; ++r) {
            sum += dxhat(r, j);
            sum_xh += dxhat(r, j) * ctx.normalized(r, j);
          }
          for (std::size_t r = 0; r < b; ++r)
            g(r, j) = ctx.inv_std[j] / bb * (bb * dxhat(r, j) - sum - ctx.normalized(r, j) * sum_xh);
        }
      } else {
        for (std::size_t r = 0; r < b; ++r)
          for (std::size_t j = 0; j < n; ++j) g(r, j) = dxhat(r, j) * ctx.inv_std[j];
      }
    }

    lg.weight = kernels::matmul_tn(g, ctx.input);
    for (std::size_t r = 0; r < b; ++r)
      for (std::size_t j = 0; j < n; ++j) lg.bias(0, j) += g(r, j);
    g = kernels::matmul(g, layer.weight);
  }
  out.grad_input = std::move(g);
  return out;
}

void update_running_stats(ProjectorParams& proj, const MlpContext& context) {
  if (context.mode != Mode::Train) return;
  require(context.layers.size() == proj.depth(), ErrorKind::ShapeMismatch,
          "update_running_stats: context depth does not match projector");
  const double m = proj.bn_momentum;
  for (std::size_t l = 0; l < proj.depth(); ++l) {
    auto& layer = proj.layers[l];
    if (!layer.norm_act) continue;
    const auto& ctx = context.layers[l];
    const double b = static_cast<double>(ctx.input.rows());
    for (std::size_t j = 0; j < layer.out_dim(); ++j) {
      const double unbiased = ctx.batch_var[j] * b / (b - 1.0);
      layer.running_mean(0, j) = (1.0 - m) * layer.running_mean(0, j) + m * ctx.batch_mean[j];
      layer.running_var(0, j) = (1.0 - m) * layer.running_var(0, j) + m * unbiased;
    }
  }
}

}  // namespace unsee
