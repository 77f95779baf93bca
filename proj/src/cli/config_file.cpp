#include "unsee/cli/config_file.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "unsee/error.hpp"
#include "unsee/format.hpp"

namespace unsee {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

bool parse_bool(std::string_view v) {
  if (v == "1" || v == "true" || v == "yes") return true;
  if (v == "0" || v == "false" || v == "no") return false;
  fail(ErrorKind::Parse, "not a boolean: '" + std::string(v) + "'");
}

std::string_view to_string(EmaOrientation o) {
  return o == EmaOrientation::FreshWeight ? "fresh" : "history";
}

EmaOrientation parse_orientation(std::string_view v) {
  if (v == "fresh") return EmaOrientation::FreshWeight;
  if (v == "history") return EmaOrientation::HistoryWeight;
  fail(ErrorKind::Parse, "expected 'fresh' or 'history', got '" + std::string(v) + "'");
}

struct Field {
  std::string_view key;
  std::function<void(RunConfig&, std::string_view)> set;
  std::function<std::string(const TrainConfig&)> get;  // empty for path keys
};

template <typename T>
Field size_field(std::string_view key, T TrainConfig::*member) {
  return {key,
          [member](RunConfig& rc, std::string_view v) {
            rc.train.*member = static_cast<T>(parse_unsigned(v));
          },
          [member](const TrainConfig& c) { return std::to_string(c.*member); }};
}

Field real_field(std::string_view key, std::function<double&(TrainConfig&)> ref) {
  return {key, [ref](RunConfig& rc, std::string_view v) { ref(rc.train) = parse_double(v); },
          [ref](const TrainConfig& c) { return format_double(ref(const_cast<TrainConfig&>(c))); }};
}

Field path_field(std::string_view key, std::function<void(RunConfig&, std::filesystem::path)> set) {
  return {key, [set](RunConfig& rc, std::string_view v) { set(rc, std::filesystem::path(std::string(v))); },
          {}};
}

const std::vector<Field>& fields() {
  static const std::vector<Field> f = {
      path_field("corpus", [](RunConfig& rc, auto p) { rc.corpus = std::move(p); }),
      path_field("dev", [](RunConfig& rc, auto p) { rc.dev = std::move(p); }),
      path_field("out_dir", [](RunConfig& rc, auto p) { rc.out_dir = std::move(p); }),
      path_field("vocab", [](RunConfig& rc, auto p) { rc.vocab = std::move(p); }),
      {"variant", [](RunConfig& rc, std::string_view v) { rc.train.variant = parse_variant(v); },
       [](const TrainConfig& c) { return std::string(to_string(c.variant)); }},
      {"objective",
       [](RunConfig& rc, std::string_view v) { rc.train.objective.kind = parse_objective(v); },
       [](const TrainConfig& c) { return std::string(to_string(c.objective.kind)); }},
      size_field("batch_size", &TrainConfig::batch_size),
      real_field("learning_rate", [](TrainConfig& c) -> double& { return c.learning_rate; }),
      size_field("max_len", &TrainConfig::max_len),
      size_field("epochs", &TrainConfig::epochs),
      real_field("decay", [](TrainConfig& c) -> double& { return c.decay; }),
      size_field("mlp_depth", &TrainConfig::mlp_depth),
      size_field("eval_count", &TrainConfig::eval_count),
      {"seed", [](RunConfig& rc, std::string_view v) { rc.train.seed = parse_unsigned(v); },
       [](const TrainConfig& c) { return std::to_string(c.seed); }},
      size_field("embed_dim", &TrainConfig::embed_dim),
      real_field("dropout", [](TrainConfig& c) -> double& { return c.dropout; }),
      {"feedforward", [](RunConfig& rc, std::string_view v) { rc.train.feedforward = parse_bool(v); },
       [](const TrainConfig& c) { return std::string(c.feedforward ? "true" : "false"); }},
      real_field("embedding_scale", [](TrainConfig& c) -> double& { return c.embedding_scale; }),
      size_field("min_count", &TrainConfig::min_count),
      size_field("projector_hidden", &TrainConfig::projector_hidden),
      size_field("projector_out", &TrainConfig::projector_out),
      real_field("bn_momentum", [](TrainConfig& c) -> double& { return c.bn_momentum; }),
      real_field("adam_beta1", [](TrainConfig& c) -> double& { return c.adam.beta1; }),
      real_field("adam_beta2", [](TrainConfig& c) -> double& { return c.adam.beta2; }),
      real_field("adam_eps", [](TrainConfig& c) -> double& { return c.adam.eps; }),
      real_field("clip_norm", [](TrainConfig& c) -> double& { return c.clip_norm; }),
      real_field("lambda", [](TrainConfig& c) -> double& { return c.objective.barlow.lambda; }),
      real_field("barlow_eps", [](TrainConfig& c) -> double& { return c.objective.barlow.eps; }),
      real_field("vicreg_w_inv", [](TrainConfig& c) -> double& { return c.objective.vicreg.w_inv; }),
      real_field("vicreg_w_var", [](TrainConfig& c) -> double& { return c.objective.vicreg.w_var; }),
      real_field("vicreg_w_cov", [](TrainConfig& c) -> double& { return c.objective.vicreg.w_cov; }),
      real_field("vicreg_gamma", [](TrainConfig& c) -> double& { return c.objective.vicreg.gamma; }),
      real_field("vicreg_eps", [](TrainConfig& c) -> double& { return c.objective.vicreg.eps; }),
      real_field("corinfomax_w_inv", [](TrainConfig& c) -> double& { return c.objective.corinfomax.w_inv; }),
      real_field("corinfomax_w_cov", [](TrainConfig& c) -> double& { return c.objective.corinfomax.w_cov; }),
      real_field("corinfomax_r_ini", [](TrainConfig& c) -> double& { return c.objective.corinfomax.r_ini; }),
      real_field("corinfomax_la_r", [](TrainConfig& c) -> double& { return c.objective.corinfomax.la_r; }),
      real_field("corinfomax_la_mu", [](TrainConfig& c) -> double& { return c.objective.corinfomax.la_mu; }),
      real_field("corinfomax_r_eps_weight",
                 [](TrainConfig& c) -> double& { return c.objective.corinfomax.r_eps_weight; }),
      {"corinfomax_orientation",
       [](RunConfig& rc, std::string_view v) { rc.train.objective.corinfomax.orientation = parse_orientation(v); },
       [](const TrainConfig& c) { return std::string(to_string(c.objective.corinfomax.orientation)); }},
      {"byol_symmetric",
       [](RunConfig& rc, std::string_view v) { rc.train.objective.byol_symmetric = parse_bool(v); },
       [](const TrainConfig& c) { return std::string(c.objective.byol_symmetric ? "true" : "false"); }},
  };
  return f;
}

}  // namespace

const std::vector<std::string_view>& required_config_keys() {
  static const std::vector<std::string_view> keys = {"corpus", "dev", "out_dir",
                                                     "objective", "variant", "epochs"};
  return keys;
}

const std::vector<std::string_view>& known_config_keys() {
  static const std::vector<std::string_view> keys = [] {
    std::vector<std::string_view> k;
    for (const auto& f : fields()) k.push_back(f.key);
    return k;
  }();
  return keys;
}

RunConfig parse_run_config(std::string_view text, const std::filesystem::path& base_dir) {
  RunConfig rc;
  std::set<std::string, std::less<>> seen;
  std::istringstream in{std::string(text)};
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line = raw;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    require(eq != std::string_view::npos, ErrorKind::Config,
            "line " + std::to_string(line_no) + ": expected key=value");
    const std::string_view key = trim(line.substr(0, eq));
    const std::string_view value = trim(line.substr(eq + 1));
    const auto& fs = fields();
    const auto it = std::find_if(fs.begin(), fs.end(), [&](const Field& f) { return f.key == key; });
    require(it != fs.end(), ErrorKind::Config, "unknown config key '" + std::string(key) + "'");
    require(seen.insert(std::string(key)).second, ErrorKind::Config,
            "duplicate config key '" + std::string(key) + "'");
    try {
      it->set(rc, value);
    } catch (const Error& e) {
      fail(ErrorKind::Config, "config key '" + std::string(key) + "': " + e.what());
    }
  }
  for (auto key : required_config_keys())
    require(seen.count(key) > 0, ErrorKind::Config, "missing required config key '" + std::string(key) + "'");

  auto resolve = [&base_dir](std::filesystem::path& p) {
    if (!p.empty() && p.is_relative() && !base_dir.empty()) p = base_dir / p;
  };
  resolve(rc.corpus);
  resolve(rc.dev);
  resolve(rc.out_dir);
  if (rc.vocab) resolve(*rc.vocab);
  validate(rc.train);
  return rc;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorKind::Config, "cannot open config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str(), path.parent_path());
}

std::string dump_train_config(const TrainConfig& cfg) {
  std::string out;
  for (const auto& f : fields())
    if (f.get) out += std::string(f.key) + "=" + f.get(cfg) + "\n";
  return out;
}

}  // namespace unsee
