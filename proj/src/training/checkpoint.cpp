#include "unsee/training/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

#include "unsee/error.hpp"
#include "unsee/format.hpp"

namespace unsee {

namespace {

struct TensorEntry {
  std::string name;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t offset = 0;
};

// Every tensor written to / expected in a checkpoint, in payload order.
std::vector<std::pair<std::string, const Matrix*>> tensor_table(
    const Model& m, const std::optional<CorInfoMaxState>& state) {
  std::vector<std::pair<std::string, const Matrix*>> t;
  auto add = [&t](std::string name, const Matrix& x) {
    if (!x.empty()) t.emplace_back(std::move(name), &x);
  };
  add("encoder.embedding", m.encoder.embedding);
  add("encoder.ff_weight", m.encoder.ff_weight);
  add("encoder.ff_bias", m.encoder.ff_bias);
  for (std::size_t l = 0; l < m.projector.layers.size(); ++l) {
    const auto& layer = m.projector.layers[l];
    const std::string p = "projector." + std::to_string(l) + ".";
    add(p + "weight", layer.weight);
    add(p + "bias", layer.bias);
    add(p + "bn_scale", layer.bn_scale);
    add(p + "bn_shift", layer.bn_shift);
    add(p + "running_mean", layer.running_mean);
    add(p + "running_var", layer.running_var);
  }
  if (m.target) {
    add("target.embedding", m.target->params.embedding);
    add("target.ff_weight", m.target->params.ff_weight);
    add("target.ff_bias", m.target->params.ff_bias);
  }
  if (state) {
    add("corinfomax.r_a", state->r_a);
    add("corinfomax.r_b", state->r_b);
    add("corinfomax.mu_a", state->mu_a);
    add("corinfomax.mu_b", state->mu_b);
  }
  return t;
}

std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << v;
  return os.str();
}

void put_le(std::string& out, double v) {
  auto bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) {
    out.push_back(static_cast<char>(bits & 0xff));
    bits >>= 8;
  }
}

double get_le(const char* p) {
  std::uint64_t bits = 0;
  for (int i = 7; i >= 0; --i) bits = (bits << 8) | static_cast<unsigned char>(p[i]);
  return std::bit_cast<double>(bits);
}

const std::string& meta(const std::map<std::string, std::string>& m, const std::string& key,
                        const std::filesystem::path& path) {
  const auto it = m.find(key);
  require(it != m.end(), ErrorKind::CheckpointMismatch,
          path.string() + ": missing metadata '" + key + "'");
  return it->second;
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  validate(ckpt.model);
  const Model& m = ckpt.model;
  std::string header(kCheckpointMagic);
  auto meta_line = [&header](const std::string& key, const std::string& value) {
    header += "meta " + key + " " + value + "\n";
  };
  meta_line("version", std::to_string(kCheckpointVersion));
  meta_line("variant", std::string(to_string(m.variant)));
  meta_line("vocab_hash", hex64(ckpt.vocab_hash));
  if (!ckpt.vocab_file.empty()) meta_line("vocab_file", ckpt.vocab_file);
  meta_line("dropout", format_double(m.encoder.dropout));
  meta_line("max_len", std::to_string(m.encoder.max_len));
  meta_line("feedforward", m.encoder.feedforward ? "1" : "0");
  meta_line("bn_eps", format_double(m.projector.bn_eps));
  meta_line("bn_momentum", format_double(m.projector.bn_momentum));
  if (m.target) meta_line("decay", format_double(m.target->decay));
  if (ckpt.objective_state) meta_line("corinfomax_step", std::to_string(ckpt.objective_state->step));
  for (const auto& [k, v] : ckpt.extra) {
    require(k.find_first_of(" \n") == std::string::npos && v.find('\n') == std::string::npos,
            ErrorKind::InvalidArgument, "checkpoint metadata must be single-line");
    meta_line("x." + k, v);
  }

  std::string payload;
  for (const auto& [name, t] : tensor_table(m, ckpt.objective_state)) {
    header += "tensor " + name + " " + std::to_string(t->rows()) + "x" + std::to_string(t->cols()) +
              " " + std::to_string(payload.size()) + "\n";
    for (double v : t->values()) put_le(payload, v);
  }
  header += "\n";

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(static_cast<bool>(out), ErrorKind::Io, "cannot write checkpoint " + path.string());
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
  require(static_cast<bool>(out), ErrorKind::Io, "error writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::Io, "cannot open checkpoint " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const std::string where = path.string() + ": ";

  require(bytes.size() >= kCheckpointMagic.size() &&
              std::string_view(bytes).substr(0, kCheckpointMagic.size()) == kCheckpointMagic,
          ErrorKind::BadMagic, where + "not an UNSEE01 checkpoint");

  std::map<std::string, std::string> metas;
  std::vector<TensorEntry> entries;
  std::size_t pos = kCheckpointMagic.size();
  bool header_done = false;
  while (pos < bytes.size()) {
    const auto nl = bytes.find('\n', pos);
    require(nl != std::string::npos, ErrorKind::Truncated, where + "header ends mid-line");
    const std::string line = bytes.substr(pos, nl - pos);
    pos = nl + 1;
    if (line.empty()) {
      header_done = true;
      break;
    }
    std::istringstream ls(line);
    std::string kind, name;
    ls >> kind >> name;
    if (kind == "meta") {
      std::string value;
      std::getline(ls >> std::ws, value);
      metas[name] = value;
    } else if (kind == "tensor") {
      std::string shape, offset;
      ls >> shape >> offset;
      const auto x = shape.find('x');
      require(x != std::string::npos, ErrorKind::Parse, where + "bad tensor shape '" + shape + "'");
      TensorEntry e{name, static_cast<std::size_t>(parse_unsigned(shape.substr(0, x))),
                    static_cast<std::size_t>(parse_unsigned(shape.substr(x + 1))),
                    static_cast<std::size_t>(parse_unsigned(offset))};
      entries.push_back(std::move(e));
    } else {
      fail(ErrorKind::Parse, where + "unknown header line '" + line + "'");
    }
  }
  require(header_done, ErrorKind::Truncated, where + "header is not terminated");
  require(meta(metas, "version", path) == std::to_string(kCheckpointVersion), ErrorKind::CheckpointMismatch,
          where + "unsupported checkpoint version " + metas["version"]);

  // Payload.
  const std::size_t payload_start = pos;
  std::map<std::string, Matrix> tensors;
  std::size_t expected_offset = 0;
  for (const auto& e : entries) {
    require(e.offset == expected_offset, ErrorKind::CheckpointMismatch,
            where + "tensor table offsets are not contiguous at '" + e.name + "'");
    const std::size_t n = e.rows * e.cols;
    require(payload_start + e.offset + n * 8 <= bytes.size(), ErrorKind::Truncated,
            where + "payload ends inside tensor '" + e.name + "'");
    std::vector<double> data(n);
    const char* p = bytes.data() + payload_start + e.offset;
    for (std::size_t i = 0; i < n; ++i) data[i] = get_le(p + 8 * i);
    require(tensors.emplace(e.name, Matrix(e.rows, e.cols, std::move(data))).second,
            ErrorKind::CheckpointMismatch, where + "duplicate tensor '" + e.name + "'");
    expected_offset += n * 8;
  }
  require(payload_start + expected_offset == bytes.size(), ErrorKind::CheckpointMismatch,
          where + "trailing bytes after the last tensor");

  auto take = [&](const std::string& name) -> Matrix {
    auto it = tensors.find(name);
    require(it != tensors.end(), ErrorKind::CheckpointMismatch, where + "missing tensor '" + name + "'");
    Matrix m = std::move(it->second);
    tensors.erase(it);
    return m;
  };
  auto take_if = [&](const std::string& name) -> Matrix {
    return tensors.count(name) ? take(name) : Matrix();
  };

  Checkpoint ckpt;
  Model& m = ckpt.model;
  m.variant = parse_variant(meta(metas, "variant", path));
  ckpt.vocab_hash = std::stoull(meta(metas, "vocab_hash", path), nullptr, 16);
  if (metas.count("vocab_file")) ckpt.vocab_file = metas["vocab_file"];

  m.encoder.dropout = parse_double(meta(metas, "dropout", path));
  m.encoder.max_len = parse_unsigned(meta(metas, "max_len", path));
  m.encoder.feedforward = meta(metas, "feedforward", path) == "1";
  m.encoder.embedding = take("encoder.embedding");
  if (m.encoder.feedforward) {
    m.encoder.ff_weight = take("encoder.ff_weight");
    m.encoder.ff_bias = take("encoder.ff_bias");
  }

  m.projector.bn_eps = parse_double(meta(metas, "bn_eps", path));
  m.projector.bn_momentum = parse_double(meta(metas, "bn_momentum", path));
  for (std::size_t l = 0;; ++l) {
    const std::string p = "projector." + std::to_string(l) + ".";
    if (!tensors.count(p + "weight")) break;
    ProjectorLayer layer;
    layer.weight = take(p + "weight");
    layer.bias = take(p + "bias");
    layer.bn_scale = take_if(p + "bn_scale");
    layer.norm_act = !layer.bn_scale.empty();
    if (layer.norm_act) {
      layer.bn_shift = take(p + "bn_shift");
      layer.running_mean = take(p + "running_mean");
      layer.running_var = take(p + "running_var");
    }
    m.projector.layers.push_back(std::move(layer));
  }
  require(!m.projector.layers.empty(), ErrorKind::CheckpointMismatch, where + "no projector layers");

  if (m.variant != Variant::Projection) {
    TargetState t;
    t.decay = parse_double(meta(metas, "decay", path));
    t.params = m.encoder;
    t.params.embedding = take("target.embedding");
    if (t.params.feedforward) {
      t.params.ff_weight = take("target.ff_weight");
      t.params.ff_bias = take("target.ff_bias");
    }
    m.target = std::move(t);
  }

  if (tensors.count("corinfomax.r_a")) {
    CorInfoMaxState s;
    s.r_a = take("corinfomax.r_a");
    s.r_b = take("corinfomax.r_b");
    s.mu_a = take("corinfomax.mu_a");
    s.mu_b = take("corinfomax.mu_b");
    s.step = parse_unsigned(meta(metas, "corinfomax_step", path));
    ckpt.objective_state = std::move(s);
  }
  require(tensors.empty(), ErrorKind::CheckpointMismatch,
          where + "unexpected tensor '" + (tensors.empty() ? std::string() : tensors.begin()->first) + "'");

  for (const auto& [k, v] : metas)
    if (k.rfind("x.", 0) == 0) ckpt.extra[k.substr(2)] = v;

  try {
    validate(m);
  } catch (const Error& e) {
    fail(ErrorKind::CheckpointMismatch, where + e.what());
  }
  return ckpt;
}

Checkpoint load_checkpoint(const std::filesystem::path& path, const Model& expected) {
  Checkpoint ckpt = load_checkpoint(path);
  const std::string where = path.string() + ": ";
  require(ckpt.model.variant == expected.variant, ErrorKind::CheckpointMismatch,
          where + "checkpoint variant " + std::string(to_string(ckpt.model.variant)) +
              " does not match requested " + std::string(to_string(expected.variant)));
  const auto have = tensor_table(ckpt.model, std::nullopt);
  const auto want = tensor_table(expected, std::nullopt);
  require(have.size() == want.size(), ErrorKind::CheckpointMismatch,
          where + "tensor table has " + std::to_string(have.size()) + " model tensors, requested config has " +
              std::to_string(want.size()) + " (projector depth " + std::to_string(ckpt.model.projector.depth()) +
              " vs " + std::to_string(expected.projector.depth()) + ")");
  for (std::size_t i = 0; i < have.size(); ++i) {
    require(have[i].first == want[i].first && have[i].second->same_shape(*want[i].second),
            ErrorKind::CheckpointMismatch,
            where + "tensor '" + have[i].first + "' does not match requested shape of '" + want[i].first + "'");
  }
  return ckpt;
}

}  // namespace unsee
