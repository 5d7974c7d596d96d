#include "phx/config.h"

#include <fstream>
#include <stdexcept>

namespace phx {

using nlohmann::json;

void TrainConfig::validate() const {
  if (alpha < 0 || beta < 0)
    throw std::invalid_argument("config: alpha and beta must be >= 0");
  if (k < 1) throw std::invalid_argument("config: k must be >= 1");
  if (d < 1 || n_layers < 0 || t_max < 1)
    throw std::invalid_argument("config: bad encoder sizes");
  if (epochs < 1 || batch_size < 1)
    throw std::invalid_argument("config: epochs and batch_size must be >= 1");
  if (lr <= 0) throw std::invalid_argument("config: lr must be > 0");
  if (top_local < 1) throw std::invalid_argument("config: top_local must be >= 1");
  if (threads < 1) throw std::invalid_argument("config: threads must be >= 1");
  if (reindex_interval_steps < 0)
    throw std::invalid_argument("config: reindex_interval_steps must be >= 0");
}

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

}  // namespace

TrainConfig load_config_file(const std::string& path, TrainConfig base) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  std::string line;
  int64_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("config line " + std::to_string(lineno) +
                               ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    try {
      if (key == "alpha") base.alpha = std::stod(val);
      else if (key == "beta") base.beta = std::stod(val);
      else if (key == "k") base.k = std::stoll(val);
      else if (key == "d") base.d = std::stoll(val);
      else if (key == "n_layers") base.n_layers = std::stoll(val);
      else if (key == "t_max") base.t_max = std::stoll(val);
      else if (key == "lr") base.lr = std::stod(val);
      else if (key == "epochs") base.epochs = std::stoll(val);
      else if (key == "batch_size") base.batch_size = std::stoll(val);
      else if (key == "seed") base.seed = std::stoull(val);
      else if (key == "reindex_interval_steps") base.reindex_interval_steps = std::stoll(val);
      else if (key == "top_local") base.top_local = std::stoll(val);
      else if (key == "threads") base.threads = std::stoll(val);
      else if (key == "lowercase") base.lowercase = (val == "true" || val == "1");
      else
        throw std::runtime_error("config line " + std::to_string(lineno) +
                                 ": unknown key '" + key + "'");
    } catch (const std::invalid_argument&) {
      throw std::runtime_error("config line " + std::to_string(lineno) +
                               ": bad value for '" + key + "'");
    }
  }
  return base;
}

json config_to_json(const TrainConfig& c) {
  return json{{"alpha", c.alpha},
              {"beta", c.beta},
              {"k", c.k},
              {"d", c.d},
              {"n_layers", c.n_layers},
              {"t_max", c.t_max},
              {"lr", c.lr},
              {"epochs", c.epochs},
              {"batch_size", c.batch_size},
              {"seed", c.seed},
              {"reindex_interval_steps", c.reindex_interval_steps},
              {"top_local", c.top_local},
              {"threads", c.threads},
              {"lowercase", c.lowercase}};
}

TrainConfig config_from_json(const json& j) {
  TrainConfig c;
  c.alpha = j.at("alpha").get<double>();
  c.beta = j.at("beta").get<double>();
  c.k = j.at("k").get<int64_t>();
  c.d = j.at("d").get<int64_t>();
  c.n_layers = j.at("n_layers").get<int64_t>();
  c.t_max = j.at("t_max").get<int64_t>();
  c.lr = j.at("lr").get<double>();
  c.epochs = j.at("epochs").get<int64_t>();
  c.batch_size = j.at("batch_size").get<int64_t>();
  c.seed = j.at("seed").get<uint64_t>();
  c.reindex_interval_steps = j.at("reindex_interval_steps").get<int64_t>();
  c.top_local = j.at("top_local").get<int64_t>();
  c.threads = j.at("threads").get<int64_t>();
  c.lowercase = j.at("lowercase").get<bool>();
  return c;
}

}  // namespace phx
