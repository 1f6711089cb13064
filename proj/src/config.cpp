#include "dpmc/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace dpmc {

using nlohmann::json;

namespace {

std::string join(const std::vector<std::string>& v) {
  std::string s = "invalid config:";
  for (const auto& p : v) s += "\n  - " + p;
  return s;
}

// Typed access to one JSON object that records problems instead of throwing.
class Reader {
 public:
  Reader(const json& j, std::string path, std::vector<std::string>& errors)
      : j_(j), path_(std::move(path)), errors_(errors) {
    if (!j_.is_object()) fail("", "expected an object");
  }

  ~Reader() {
    if (!j_.is_object()) return;
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.count(key)) fail(key, "unknown key");
    }
  }

  bool has(const std::string& key) {
    seen_.insert(key);
    return j_.is_object() && j_.contains(key) && !j_.at(key).is_null();
  }

  const json* node(const std::string& key, bool required) {
    if (!has(key)) {
      if (required) fail(key, "missing required key");
      return nullptr;
    }
    return &j_.at(key);
  }

  template <class T>
  void read(const std::string& key, T& out, bool required = false) {
    const json* n = node(key, required);
    if (!n) return;
    try {
      if constexpr (std::is_same_v<T, double>) {
        if (!n->is_number()) throw std::runtime_error("expected a number");
        out = n->get<double>();
      } else if constexpr (std::is_same_v<T, int>) {
        if (!n->is_number_integer()) throw std::runtime_error("expected an integer");
        out = n->get<int>();
      } else if constexpr (std::is_same_v<T, std::uint64_t>) {
        if (!n->is_number_unsigned() && !(n->is_number_integer() && n->get<long long>() >= 0)) {
          throw std::runtime_error("expected a nonnegative integer");
        }
        out = n->get<std::uint64_t>();
      } else if constexpr (std::is_same_v<T, bool>) {
        if (!n->is_boolean()) throw std::runtime_error("expected true or false");
        out = n->get<bool>();
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!n->is_string()) throw std::runtime_error("expected a string");
        out = n->get<std::string>();
      } else {
        out = n->get<T>();
      }
    } catch (const std::exception& e) {
      fail(key, e.what());
    }
  }

  void fail(const std::string& key, const std::string& what) {
    std::string where = path_;
    if (!key.empty()) where += where.empty() ? key : "." + key;
    errors_.push_back((where.empty() ? std::string("<root>") : where) + ": " + what);
  }

  std::string child(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

 private:
  const json& j_;
  std::string path_;
  std::vector<std::string>& errors_;
  std::set<std::string> seen_;
};

StepKind parse_step(const std::string& s, Reader& r, const std::string& key) {
  if (s == "ddpm") return StepKind::ddpm;
  if (s == "ddim") return StepKind::ddim;
  r.fail(key, "expected \"ddpm\" or \"ddim\", got \"" + s + "\"");
  return StepKind::ddpm;
}

const char* step_name(StepKind k) { return k == StepKind::ddpm ? "ddpm" : "ddim"; }

bool read_vector(const json& j, Vector& out) {
  if (!j.is_array()) return false;
  out.resize(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) return false;
    out[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  }
  return true;
}

bool read_matrix(const json& j, Matrix& out) {
  if (!j.is_array() || j.empty() || !j[0].is_array()) return false;
  const auto rows = j.size();
  const auto cols = j[0].size();
  out.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < rows; ++r) {
    if (!j[r].is_array() || j[r].size() != cols) return false;
    for (std::size_t c = 0; c < cols; ++c) {
      if (!j[r][c].is_number()) return false;
      out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = j[r][c].get<double>();
    }
  }
  return true;
}

json vector_json(const Vector& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

json matrix_json(const Matrix& m) {
  json a = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) a.push_back(vector_json(m.row(r).transpose()));
  return a;
}

void parse_prior(const json& j, const std::string& path, PriorSpec& p,
                 std::vector<std::string>& errors) {
  Reader r(j, path, errors);
  r.read("kind", p.kind);
  if (p.kind == "dataset") {
    r.read("path", p.dataset, true);
    return;
  }
  if (p.kind != "gmm") {
    r.fail("kind", "expected \"gmm\" or \"dataset\"");
    return;
  }
  if (const json* w = r.node("weights", true); w && !read_vector(*w, p.gmm.weights)) {
    r.fail("weights", "expected an array of numbers");
  }
  if (const json* m = r.node("means", true)) {
    if (!m->is_array()) {
      r.fail("means", "expected an array of vectors");
    } else {
      p.gmm.means.clear();
      for (std::size_t k = 0; k < m->size(); ++k) {
        Vector v;
        if (!read_vector((*m)[k], v)) r.fail("means[" + std::to_string(k) + "]", "expected a vector");
        p.gmm.means.push_back(v);
      }
    }
  }
  if (const json* c = r.node("covariances", true)) {
    if (!c->is_array()) {
      r.fail("covariances", "expected an array");
    } else {
      p.gmm.covariances.clear();
      const int d = p.gmm.dim();
      for (std::size_t k = 0; k < c->size(); ++k) {
        Matrix m;
        const json& e = (*c)[k];
        // A bare number s stands for s * I.
        if (e.is_number()) {
          m = e.get<double>() * Matrix::Identity(d, d);
        } else if (!read_matrix(e, m)) {
          r.fail("covariances[" + std::to_string(k) + "]", "expected a matrix or a number");
        }
        p.gmm.covariances.push_back(m);
      }
    }
  }
}

void parse_operator(const json& j, const std::string& path, OperatorSpec& o,
                    std::vector<std::string>& errors) {
  Reader r(j, path, errors);
  r.read("kind", o.kind, true);
  if (o.kind == "mask") {
    r.read("kept", o.kept, true);
  } else if (o.kind == "downsample") {
    r.read("factor", o.factor, true);
  } else if (o.kind == "blur") {
    r.read("kernel", o.kernel, true);
    if (o.kernel == "custom") {
      r.read("taps", o.taps, true);
    } else {
      r.read("length", o.length, true);
      if (o.kernel == "gaussian") r.read("width", o.width, true);
      else if (o.kernel != "motion") r.fail("kernel", "expected gaussian, motion or custom");
    }
  } else if (o.kind == "dense") {
    r.read("matrix", o.matrix, true);
  } else if (o.kind == "phase_retrieval") {
    r.read("oversample", o.oversample);
    r.read("delta", o.delta);
  } else if (!o.kind.empty()) {
    r.fail("kind", "unknown operator \"" + o.kind + "\"");
  }
}

void parse_sampler(const json& j, const std::string& path, SamplerSpec& s,
                   std::vector<std::string>& errors) {
  Reader r(j, path, errors);
  r.read("method", s.method, true);
  r.read("T", s.T, true);
  if (s.method == "dpmc") {
    r.read("K", s.K, true);
    r.read("eta", s.eta, true);
    r.read("xi", s.xi, true);
    r.read("xi_exponent", s.xi_exponent);
    if (const json* w = r.node("window", false)) {
      if (!w->is_array() || w->size() != 3) {
        r.fail("window", "expected [head, explore, tail]");
      } else {
        try {
          s.window = Window{(*w)[0].get<double>(), (*w)[1].get<double>(), (*w)[2].get<double>()};
        } catch (const std::exception&) {
          r.fail("window", "expected three numbers");
        }
      }
    }
    r.read("restarts", s.restarts);
    double wz = 0.0;
    if (r.has("window_zeta")) {
      r.read("window_zeta", wz);
      s.window_zeta = wz;
    }
    std::string step = step_name(s.window_step);
    r.read("window_step", step);
    s.window_step = parse_step(step, r, "window_step");
  } else if (s.method == "dps") {
    r.read("zeta", s.zeta, true);
  } else if (s.method == "unconditional") {
    std::string step = step_name(s.step);
    r.read("step", step);
    s.step = parse_step(step, r, "step");
  } else if (!s.method.empty()) {
    r.fail("method", "expected dps, dpmc or unconditional");
  }
}

void parse_metrics(const json& j, const std::string& path, MetricsSpec& m,
                   std::vector<std::string>& errors) {
  Reader r(j, path, errors);
  r.read("n_samples", m.n_samples);
  r.read("n_proj", m.n_proj);
  r.read("svg", m.svg);
  if (const json* g = r.node("grid", false)) {
    Reader gr(*g, r.child("grid"), errors);
    GridSpec spec;
    gr.read("lo", spec.lo, true);
    gr.read("hi", spec.hi, true);
    gr.read("cells", spec.cells, true);
    m.grid = spec;
  }
}

void parse_train(const json& j, const std::string& path, TrainSpec& t,
                 std::vector<std::string>& errors) {
  Reader r(j, path, errors);
  r.read("dataset_size", t.dataset_size);
  r.read("epochs", t.epochs);
  r.read("batch", t.batch);
  r.read("learning_rate", t.learning_rate);
  r.read("cosine_decay", t.cosine_decay);
  r.read("seed", t.seed);
  r.read("net", t.net);
  r.read("curve", t.curve);
}

void check_finite(double v, const std::string& what, std::vector<std::string>& out) {
  if (!std::isfinite(v)) out.push_back(what + ": must be finite");
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> problems)
    : std::runtime_error(join(problems)), problems_(std::move(problems)) {}

int ExperimentConfig::dim() const {
  if (prior.kind == "gmm") return prior.gmm.dim();
  return 0;
}

DPSConfig SamplerSpec::dps() const {
  DPSConfig c;
  c.T = T;
  c.zeta = zeta;
  return c;
}

DPMCConfig SamplerSpec::dpmc() const {
  DPMCConfig c;
  c.T = T;
  c.K = K;
  c.eta = eta;
  c.xi = xi;
  c.xi_exponent = xi_exponent;
  c.window = window;
  c.restarts = restarts;
  c.window_zeta = window_zeta;
  c.window_step = window_step;
  return c;
}

bool SamplerSpec::unguided() const {
  if (method == "unconditional") return true;
  if (method == "dps") return zeta == 0.0;
  return xi == 0.0 && window_zeta.value_or(0.0) == 0.0;
}

std::vector<std::string> validate(const ExperimentConfig& c) {
  std::vector<std::string> out;
  if (c.task.empty()) out.push_back("task: must not be empty");

  int dim = 0;
  if (c.prior.kind == "gmm") {
    try {
      c.prior.gmm.validate();
      dim = c.prior.gmm.dim();
      for (std::size_t k = 0; k < c.prior.gmm.means.size(); ++k) {
        if (!c.prior.gmm.means[k].allFinite()) out.push_back("prior.means: must be finite");
      }
    } catch (const std::exception& e) {
      out.push_back(std::string("prior: ") + e.what());
    }
  } else if (c.prior.kind == "dataset") {
    if (c.model.kind != "trained") {
      out.push_back("prior.kind: dataset priors need model.kind = trained");
    }
  }

  if (c.model.kind == "trained") {
    if (c.model.net.empty() && !c.train) out.push_back("model.net: required for trained models");
  } else if (c.model.kind != "analytic") {
    out.push_back("model.kind: expected analytic or trained");
  }

  const auto& s = c.schedule;
  if (s.steps < 1) out.push_back("schedule.steps: must be >= 1");
  if (!(s.beta_min > 0.0 && s.beta_min <= s.beta_max && s.beta_max < 1.0)) {
    out.push_back("schedule: need 0 < beta_min <= beta_max < 1");
  }

  if (!(c.sigma > 0.0) || !std::isfinite(c.sigma)) out.push_back("sigma: must be finite and > 0");

  if (dim > 0) {
    try {
      (void)build_operator(c.op, dim);
    } catch (const std::exception& e) {
      out.push_back(std::string("operator: ") + e.what());
    }
  }

  const auto& sp = c.sampler;
  if (sp.T < 1) out.push_back("sampler.T: must be >= 1");
  if (sp.T > s.steps) out.push_back("sampler.T: exceeds schedule.steps");
  if (sp.method == "dpmc") {
    try {
      sp.dpmc().validate();
    } catch (const std::exception& e) {
      out.push_back(std::string("sampler: ") + e.what());
    }
    check_finite(sp.eta, "sampler.eta", out);
    check_finite(sp.xi, "sampler.xi", out);
  } else if (sp.method == "dps") {
    try {
      sp.dps().validate();
    } catch (const std::exception& e) {
      out.push_back(std::string("sampler: ") + e.what());
    }
  }

  const auto& m = c.metrics;
  if (m.n_samples < 2) out.push_back("metrics.n_samples: must be >= 2");
  if (m.n_proj < 1) out.push_back("metrics.n_proj: must be >= 1");
  if (m.grid) {
    try {
      m.grid->validate();
      if (dim > 0 && m.grid->dims() != dim) out.push_back("metrics.grid: must match the prior dimension");
    } catch (const std::exception& e) {
      out.push_back(std::string("metrics.grid: ") + e.what());
    }
  }

  if (c.seeds.empty()) out.push_back("seeds: need at least one seed");
  if (c.output_dir.empty()) out.push_back("output_dir: must not be empty");

  if (c.train) {
    const auto& t = *c.train;
    if (t.epochs < 0) out.push_back("train.epochs: must be >= 0");
    if (t.batch < 1) out.push_back("train.batch: must be >= 1");
    if (t.dataset_size < 1) out.push_back("train.dataset_size: must be >= 1");
    if (!(t.learning_rate > 0.0) || !std::isfinite(t.learning_rate)) {
      out.push_back("train.learning_rate: must be finite and > 0");
    }
    if (t.net.empty()) out.push_back("train.net: must not be empty");
  }
  return out;
}

ExperimentConfig parse_config(const json& j) {
  std::vector<std::string> errors;
  ExperimentConfig c;
  {
    Reader r(j, "", errors);
    r.read("task", c.task, true);
    if (const json* p = r.node("prior", true)) parse_prior(*p, "prior", c.prior, errors);
    if (const json* m = r.node("model", false)) {
      Reader mr(*m, "model", errors);
      mr.read("kind", c.model.kind, true);
      mr.read("net", c.model.net);
    }
    if (const json* s = r.node("schedule", false)) {
      Reader sr(*s, "schedule", errors);
      sr.read("steps", c.schedule.steps);
      sr.read("beta_min", c.schedule.beta_min);
      sr.read("beta_max", c.schedule.beta_max);
    }
    if (const json* o = r.node("operator", true)) parse_operator(*o, "operator", c.op, errors);
    r.read("sigma", c.sigma);
    if (const json* s = r.node("sampler", true)) parse_sampler(*s, "sampler", c.sampler, errors);
    if (const json* m = r.node("metrics", false)) parse_metrics(*m, "metrics", c.metrics, errors);
    r.read("seeds", c.seeds, true);
    r.read("output_dir", c.output_dir);
    if (const json* t = r.node("train", false)) {
      TrainSpec spec;
      parse_train(*t, "train", spec, errors);
      c.train = spec;
    }
  }
  // Semantic checks only make sense once the shape parsed.
  if (errors.empty()) errors = validate(c);
  if (!errors.empty()) throw ConfigError(std::move(errors));
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ConfigError({path.string() + ": " + e.what()});
  }
  return parse_config(j);
}

json to_json(const ExperimentConfig& c) {
  json j;
  j["task"] = c.task;

  json prior{{"kind", c.prior.kind}};
  if (c.prior.kind == "dataset") {
    prior["path"] = c.prior.dataset;
  } else {
    prior["weights"] = vector_json(c.prior.gmm.weights);
    prior["means"] = json::array();
    for (const auto& m : c.prior.gmm.means) prior["means"].push_back(vector_json(m));
    prior["covariances"] = json::array();
    for (const auto& m : c.prior.gmm.covariances) prior["covariances"].push_back(matrix_json(m));
  }
  j["prior"] = prior;

  j["model"] = {{"kind", c.model.kind}};
  if (!c.model.net.empty()) j["model"]["net"] = c.model.net;
  j["schedule"] = {{"steps", c.schedule.steps},
                   {"beta_min", c.schedule.beta_min},
                   {"beta_max", c.schedule.beta_max}};

  const auto& o = c.op;
  json op{{"kind", o.kind}};
  if (o.kind == "mask") op["kept"] = o.kept;
  if (o.kind == "downsample") op["factor"] = o.factor;
  if (o.kind == "blur") {
    op["kernel"] = o.kernel;
    if (o.kernel == "custom") {
      op["taps"] = o.taps;
    } else {
      op["length"] = o.length;
      if (o.kernel == "gaussian") op["width"] = o.width;
    }
  }
  if (o.kind == "dense") op["matrix"] = o.matrix;
  if (o.kind == "phase_retrieval") {
    op["oversample"] = o.oversample;
    op["delta"] = o.delta;
  }
  j["operator"] = op;
  j["sigma"] = c.sigma;

  const auto& s = c.sampler;
  json sp{{"method", s.method}, {"T", s.T}};
  if (s.method == "dpmc") {
    sp["K"] = s.K;
    sp["eta"] = s.eta;
    sp["xi"] = s.xi;
    sp["xi_exponent"] = s.xi_exponent;
    sp["window"] = {s.window.head, s.window.explore, s.window.tail};
    sp["restarts"] = s.restarts;
    if (s.window_zeta) sp["window_zeta"] = *s.window_zeta;
    sp["window_step"] = step_name(s.window_step);
  } else if (s.method == "dps") {
    sp["zeta"] = s.zeta;
  } else {
    sp["step"] = step_name(s.step);
  }
  j["sampler"] = sp;

  json m{{"n_samples", c.metrics.n_samples}, {"n_proj", c.metrics.n_proj}, {"svg", c.metrics.svg}};
  if (c.metrics.grid) {
    m["grid"] = {{"lo", c.metrics.grid->lo}, {"hi", c.metrics.grid->hi}, {"cells", c.metrics.grid->cells}};
  }
  j["metrics"] = m;
  j["seeds"] = c.seeds;
  j["output_dir"] = c.output_dir;
  if (c.train) {
    const auto& t = *c.train;
    j["train"] = {{"dataset_size", t.dataset_size}, {"epochs", t.epochs},
                  {"batch", t.batch},               {"learning_rate", t.learning_rate},
                  {"cosine_decay", t.cosine_decay}, {"seed", t.seed},
                  {"net", t.net},                   {"curve", t.curve}};
  }
  return j;
}

OperatorPtr build_operator(const OperatorSpec& o, int dim) {
  if (o.kind == "mask") return make_mask_operator(dim, o.kept);
  if (o.kind == "downsample") return make_downsample_operator(dim, o.factor);
  if (o.kind == "blur") {
    Vector k;
    if (o.kernel == "custom") {
      k = Eigen::Map<const Vector>(o.taps.data(), static_cast<Eigen::Index>(o.taps.size()));
    } else if (o.kernel == "motion") {
      k = motion_kernel(o.length);
    } else {
      k = gaussian_kernel(o.length, o.width);
    }
    return make_blur_operator(dim, k);
  }
  if (o.kind == "dense") {
    if (o.matrix.empty()) throw std::invalid_argument("dense operator needs a matrix");
    Matrix m(static_cast<Eigen::Index>(o.matrix.size()), static_cast<Eigen::Index>(o.matrix[0].size()));
    for (std::size_t r = 0; r < o.matrix.size(); ++r) {
      if (o.matrix[r].size() != o.matrix[0].size()) throw std::invalid_argument("ragged dense matrix");
      for (std::size_t c = 0; c < o.matrix[r].size(); ++c) {
        m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = o.matrix[r][c];
      }
    }
    if (m.cols() != dim) throw std::invalid_argument("dense matrix has the wrong number of columns");
    return make_dense_operator(m);
  }
  if (o.kind == "phase_retrieval") return make_phase_retrieval_operator(dim, o.oversample, o.delta);
  throw std::invalid_argument("unknown operator kind \"" + o.kind + "\"");
}

NoiseSchedule build_schedule(const ScheduleSpec& s) {
  return make_linear_schedule(s.steps, s.beta_min, s.beta_max);
}

std::vector<Vector> load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset " + path.string());
  std::vector<Vector> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<double> vals;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) vals.push_back(std::stod(cell));
    if (!out.empty() && static_cast<std::size_t>(out.front().size()) != vals.size()) {
      throw std::runtime_error("dataset rows differ in length");
    }
    out.push_back(Eigen::Map<Vector>(vals.data(), static_cast<Eigen::Index>(vals.size())));
  }
  if (out.empty()) throw std::runtime_error("dataset is empty");
  return out;
}

}  // namespace dpmc
