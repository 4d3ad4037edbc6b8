#include "cli_app.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <mutex>
#include <numeric>
#include <random>
#include <sstream>
#include <thread>

#include "qrlab/datagen.hpp"
#include "qrlab/errors.hpp"
#include "qrlab/kernels.hpp"
#include "qrlab/krr.hpp"
#include "qrlab/oracles.hpp"
#include "qrlab/seeding.hpp"
#include "qrlab/spectra.hpp"

namespace qrlab::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const char* const kColumnsHelp =
    "results.csv columns:\n"
    "  approx_norm   d,n,seed,gap        (+ one 'median' row per d)\n"
    "  esd           d,n,seed,ks         (+ 'median' row per d)\n"
    "  mp_law        d,n,seed,ks         (+ 'median' row per d)\n"
    "  train_error   d,n,seed,train_error,prediction  (+ 'mean' row per d)\n"
    "  lambda_star   d,alpha,lambda,a_star,lambda_star,alternate\n"
    "  risk          d,n,seed,risk,stderr,prediction  (+ 'mean' row per d)\n"
    "  oracle_check  check,value,reference,stderr,status\n"
    "Spec strings:\n"
    "  --kernel   exp | cosh | quartic:b0,b2,b4 | poly:c0,c1,...\n"
    "  --cov      identity | uniform:lo,hi | two_point:v1,v2,p\n"
    "  --sampler  gaussian | gh:m\n"
    "  --teacher  pure_quadratic | deterministic_sigma | general:c0,c1,c2\n"
    "Environment: QRLAB_THREADS caps the worker pool.\n"
    "Exit status: 0 ok, 1 config error, 2 assumption violation, 3 numerical failure.";

// ---------------------------------------------------------------------------
// Spec strings

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, sep)) out.push_back(cur);
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

double to_double(const std::string& field, const std::string& text) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != text.size() || !std::isfinite(v))
    throw ConfigError("field '" + field + "': '" + text + "' is not a finite number");
  return v;
}

std::uint64_t to_uint(const std::string& field, const std::string& text) {
  if (text.empty() || !std::all_of(text.begin(), text.end(), [](unsigned char c) {
        return std::isdigit(c) != 0;
      }))
    throw ConfigError("field '" + field + "': '" + text + "' is not a non-negative integer");
  try {
    return std::stoull(text);
  } catch (const std::exception&) {
    throw ConfigError("field '" + field + "': '" + text + "' is out of range");
  }
}

// "name" or "name:p1,p2,..."
std::pair<std::string, std::vector<double>> parse_spec(const std::string& field,
                                                       const std::string& spec) {
  const auto colon = spec.find(':');
  std::pair<std::string, std::vector<double>> out;
  out.first = spec.substr(0, colon);
  if (colon != std::string::npos)
    for (const auto& p : split(spec.substr(colon + 1), ','))
      out.second.push_back(to_double(field, p));
  return out;
}

void want_params(const std::string& field, const std::string& spec, std::size_t got,
                 std::size_t want) {
  if (got != want)
    throw ConfigError("field '" + field + "': '" + spec + "' needs " + std::to_string(want) +
                      " parameter(s)");
}

KernelFunction make_kernel(const std::string& spec) {
  const auto [name, p] = parse_spec("kernel", spec);
  if (name == "exp") {
    want_params("kernel", spec, p.size(), 0);
    return KernelFunction::exp();
  }
  if (name == "cosh") {
    want_params("kernel", spec, p.size(), 0);
    return KernelFunction::cosh();
  }
  if (name == "quartic") {
    want_params("kernel", spec, p.size(), 3);
    return KernelFunction::quartic(p[0], p[1], p[2]);
  }
  if (name == "poly") {
    if (p.empty()) throw ConfigError("field 'kernel': poly needs coefficients");
    return KernelFunction::custom_poly(p);
  }
  throw ConfigError("field 'kernel': unknown kernel '" + name + "'");
}

CovarianceSpec make_cov(const std::string& spec, std::size_t d, std::uint64_t seed) {
  const auto [name, p] = parse_spec("cov", spec);
  if (name == "identity") {
    want_params("cov", spec, p.size(), 0);
    return CovarianceSpec::identity(d);
  }
  if (name == "uniform") {
    want_params("cov", spec, p.size(), 2);
    return CovarianceSpec::uniform(d, p[0], p[1], seed);
  }
  if (name == "two_point") {
    want_params("cov", spec, p.size(), 3);
    return CovarianceSpec::two_point(d, p[0], p[1], p[2], seed);
  }
  throw ConfigError("field 'cov': unknown covariance '" + name + "'");
}

MomentMatchedSampler make_sampler(const std::string& spec) {
  const auto [name, p] = parse_spec("sampler", spec);
  if (name == "gaussian") {
    want_params("sampler", spec, p.size(), 0);
    return MomentMatchedSampler::gaussian();
  }
  if (name == "gh") {
    want_params("sampler", spec, p.size(), 1);
    if (p[0] != std::floor(p[0]) || p[0] < 1)
      throw ConfigError("field 'sampler': gh node count must be a positive integer");
    return MomentMatchedSampler::gh_discrete(static_cast<int>(p[0]));
  }
  throw ConfigError("field 'sampler': unknown sampler '" + name + "'");
}

struct TeacherSpec {
  TeacherModel::Kind kind = TeacherModel::Kind::pure_quadratic;
  double c0 = 0.0, c1 = 0.0, c2 = 1.0;
};

TeacherSpec parse_teacher(const std::string& spec) {
  const auto [name, p] = parse_spec("teacher", spec);
  TeacherSpec t;
  if (name == "pure_quadratic") {
    want_params("teacher", spec, p.size(), 0);
  } else if (name == "deterministic_sigma") {
    want_params("teacher", spec, p.size(), 0);
    t.kind = TeacherModel::Kind::deterministic_sigma;
    t.c2 = 0.0;
  } else if (name == "general") {
    want_params("teacher", spec, p.size(), 3);
    t.kind = TeacherModel::Kind::general;
    t.c0 = p[0];
    t.c1 = p[1];
    t.c2 = p[2];
  } else {
    throw ConfigError("field 'teacher': unknown teacher '" + name + "'");
  }
  return t;
}

// Teacher for one (d, seed): G and beta come from the teacher stream.
TeacherModel make_teacher(const TeacherSpec& t, const CovarianceSpec& cov, std::uint64_t seed) {
  const std::size_t d = cov.dim();
  switch (t.kind) {
    case TeacherModel::Kind::deterministic_sigma:
      return TeacherModel::deterministic_sigma(cov);
    case TeacherModel::Kind::pure_quadratic:
      return TeacherModel::pure_quadratic(random_symmetric_gaussian(d, seed));
    case TeacherModel::Kind::general: {
      Engine eng = make_engine(seed, Stream::teacher, 1u << 20);
      std::normal_distribution<double> g;
      Eigen::VectorXd beta(static_cast<Eigen::Index>(d));
      for (Eigen::Index i = 0; i < beta.size(); ++i) beta[i] = g(eng);
      beta.normalize();
      return TeacherModel::general(t.c0, t.c1, beta, t.c2, random_symmetric_gaussian(d, seed));
    }
  }
  throw ConfigError("field 'teacher': unsupported");
}

NuChoice nu_choice(const std::string& nu) {
  return nu == "limit" ? NuChoice::limit : NuChoice::finite;
}

// ---------------------------------------------------------------------------
// JSON field access with field-named diagnostics

template <class T>
T field_as(const json& j, const std::string& key) {
  try {
    return j.get<T>();
  } catch (const json::exception&) {
    throw ConfigError("field '" + key + "': wrong type (got " + std::string(j.type_name()) +
                      ")");
  }
}

double median(std::vector<double> v) {
  if (v.empty()) return std::nan("");
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

double mean(const std::vector<double>& v) {
  if (v.empty()) return std::nan("");
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(12) << v;
  return os.str();
}

// ---------------------------------------------------------------------------
// Worker pool

std::size_t worker_cap() {
  std::size_t cap = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("QRLAB_THREADS")) {
    try {
      const long v = std::stol(env);
      if (v >= 1) cap = static_cast<std::size_t>(v);
    } catch (const std::exception&) {
    }
  }
  return cap;
}

// Runs fn(i) for i < count on up to worker_cap() threads. The first failure
// in job order is rethrown after every worker has joined.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& fn) {
  std::vector<std::exception_ptr> errors(count);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t n_threads = std::min(worker_cap(), std::max<std::size_t>(count, 1));
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

// ---------------------------------------------------------------------------
// SVG overlay: histogram bars, law density polyline, atom marker.

void write_overlay_svg(const fs::path& path, const std::vector<double>& eigs,
                       const SpectralLaw& law, const std::string& title) {
  const double W = 640, H = 400, L = 50, R = 20, T = 30, B = 40;
  // Window on the law's support; the few spike eigenvalues from the low-rank
  // part of the kernel fall outside and are not drawn.
  double lo = 0.0, hi = 0.0;
  for (std::size_t i = 0; i < law.grid.size(); ++i)
    if (law.density[i] > 1e-4) hi = std::max(hi, law.grid[i]);
  if (!(hi > 0.0)) hi = eigs[eigs.size() / 2] * 2.0 + 1.0;
  hi *= 1.15;
  lo = std::min(0.0, eigs.front());

  const int bins = 60;
  const double width = (hi - lo) / bins;
  std::vector<double> hist(bins, 0.0);
  for (double e : eigs) {
    if (e > hi) continue;
    int b = static_cast<int>((e - lo) / width);
    hist[static_cast<std::size_t>(std::clamp(b, 0, bins - 1))] += 1.0;
  }
  for (double& h : hist) h /= static_cast<double>(eigs.size()) * width;
  const double hmax = *std::max_element(hist.begin(), hist.end());
  double dmax = 0.0;
  for (double v : law.density) dmax = std::max(dmax, v);
  const double ymax = 1.1 * std::max(hmax, std::min(dmax, 2.0 * hmax));

  auto px = [&](double x) { return L + (x - lo) / (hi - lo) * (W - L - R); };
  auto py = [&](double y) { return H - B - std::min(y, ymax) / ymax * (H - T - B); };

  std::ofstream out(path);
  out << std::setprecision(6);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
      << "\" viewBox=\"0 0 " << W << ' ' << H << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << L << "\" y=\"20\" font-family=\"sans-serif\" font-size=\"13\">"
      << title << "</text>\n";
  out << "<g fill=\"#9ecae1\" stroke=\"#3182bd\" stroke-width=\"0.5\">\n";
  for (int b = 0; b < bins; ++b) {
    const double x0 = px(lo + b * width), x1 = px(lo + (b + 1) * width);
    const double y = py(hist[static_cast<std::size_t>(b)]);
    out << "<rect x=\"" << x0 << "\" y=\"" << y << "\" width=\"" << (x1 - x0)
        << "\" height=\"" << (H - B - y) << "\"/>\n";
  }
  out << "</g>\n<polyline fill=\"none\" stroke=\"#d62728\" stroke-width=\"1.5\" points=\"";
  for (std::size_t i = 0; i < law.grid.size(); ++i) {
    if (law.grid[i] < lo || law.grid[i] > hi) continue;
    out << px(law.grid[i]) << ',' << py(law.density[i]) << ' ';
  }
  out << "\"/>\n";
  if (law.atom0_mass > 0.0) {
    out << "<line x1=\"" << px(0) << "\" y1=\"" << py(0) << "\" x2=\"" << px(0) << "\" y2=\""
        << T << "\" stroke=\"#2ca02c\" stroke-dasharray=\"4,3\"/>\n";
    out << "<circle cx=\"" << px(0) << "\" cy=\"" << T << "\" r=\"4\" fill=\"#2ca02c\"/>\n";
    out << "<text x=\"" << px(0) + 6 << "\" y=\"" << T + 4
        << "\" font-family=\"sans-serif\" font-size=\"11\">atom at 0, mass "
        << law.atom0_mass << "</text>\n";
  }
  out << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B
      << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B
      << "\" stroke=\"black\"/>\n";
  out << "<text x=\"" << L << "\" y=\"" << H - 15 << "\" font-family=\"sans-serif\" "
      << "font-size=\"11\">" << lo << "</text>\n";
  out << "<text x=\"" << W - R - 40 << "\" y=\"" << H - 15
      << "\" font-family=\"sans-serif\" font-size=\"11\">" << hi << "</text>\n";
  out << "<text x=\"5\" y=\"" << T + 10 << "\" font-family=\"sans-serif\" font-size=\"11\">"
      << ymax << "</text>\n";
  out << "</svg>\n";
}

// ---------------------------------------------------------------------------
// Experiments

struct Job {
  std::size_t d = 0;
  std::uint64_t seed = 0;
};

struct Output {
  json records = json::array();
  json summary = json::object();
  std::vector<std::string> csv_header;
  std::vector<std::vector<std::string>> csv_rows;
};

std::vector<Job> seed_jobs(const ExperimentConfig& cfg) {
  std::vector<Job> jobs;
  for (std::size_t d : cfg.d)
    for (std::uint64_t s : cfg.seeds) jobs.push_back({d, s});
  return jobs;
}

double realized_alpha(std::size_t d, std::size_t n) {
  return static_cast<double>(d) * static_cast<double>(d) / (2.0 * static_cast<double>(n));
}

Output run_approx_norm(const ExperimentConfig& cfg, std::ostream& log) {
  const KernelFunction kernel = make_kernel(cfg.kernel);
  const MomentMatchedSampler sampler = make_sampler(cfg.sampler);
  const auto jobs = seed_jobs(cfg);
  std::vector<json> rec(jobs.size());
  parallel_for(jobs.size(), [&](std::size_t i) {
    const auto [d, seed] = jobs[i];
    const std::size_t n = derived_n(d, cfg.alpha);
    const CovarianceSpec cov = make_cov(cfg.cov, d, cfg.cov_seed);
    const Dataset ds = sample_dataset(n, cov, sampler, seed);
    const Eigen::MatrixXd K = kernel_matrix(ds, kernel);
    const double gap = spectral_norm_gap(K, quad_kernel_matrix(ds, quad_coeffs(kernel, cov)));
    const double gap_t = spectral_norm_gap(K, quad_kernel_matrix(ds, taylor_coeffs(kernel, cov)));
    rec[i] = {{"d", d}, {"n", n}, {"seed", seed}, {"gap", gap}, {"gap_taylor", gap_t}};
  });
  Output out;
  out.csv_header = {"d", "n", "seed", "gap"};
  for (std::size_t d : cfg.d) {
    std::vector<double> g, gt;
    for (const auto& r : rec) {
      if (r["d"] != d) continue;
      out.records.push_back(r);
      g.push_back(r["gap"]);
      gt.push_back(r["gap_taylor"]);
      out.csv_rows.push_back({std::to_string(d), std::to_string(r["n"].get<std::size_t>()),
                              std::to_string(r["seed"].get<std::uint64_t>()),
                              fmt(r["gap"])});
    }
    const std::size_t n = derived_n(d, cfg.alpha);
    out.summary[std::to_string(d)] = {
        {"n", n}, {"median_gap", median(g)}, {"median_gap_taylor", median(gt)}};
    out.csv_rows.push_back({std::to_string(d), std::to_string(n), "median", fmt(median(g))});
    log << "d=" << d << " n=" << n << " median gap " << fmt(median(g)) << " (taylor "
        << fmt(median(gt)) << ")\n";
  }
  return out;
}

// esd and mp_law share everything but the matrix.
Output run_spectrum(const ExperimentConfig& cfg, bool kernel_route, std::ostream& log) {
  const KernelFunction kernel = make_kernel(cfg.kernel);
  const MomentMatchedSampler sampler = make_sampler(cfg.sampler);
  const auto jobs = seed_jobs(cfg);
  std::vector<json> rec(jobs.size());
  std::vector<std::vector<double>> eigs(jobs.size());
  std::vector<SpectralLaw> laws(jobs.size());
  parallel_for(jobs.size(), [&](std::size_t i) {
    const auto [d, seed] = jobs[i];
    const std::size_t n = derived_n(d, cfg.alpha);
    const double alpha = realized_alpha(d, n);
    const CovarianceSpec cov = make_cov(cfg.cov, d, cfg.cov_seed);
    const Dataset ds = sample_dataset(n, cov, sampler, seed);
    const RiskInputs in = risk_inputs(kernel, cov, alpha, nu_choice(cfg.nu));
    Eigen::MatrixXd M;
    if (kernel_route) {
      // (4 alpha / f'') (K - a I) tracks (1/n) Xbar2 Xbar2^T.
      if (!(in.f2 > 0.0)) throw AssumptionViolation("esd: f''(0) must be > 0");
      const QuadCoeffs c = quad_coeffs(kernel, cov);
      M = kernel_matrix(ds, kernel);
      M.diagonal().array() -= c.a;
      M *= 4.0 * alpha / in.f2;
    } else {
      const Eigen::MatrixXd Xb = centered_tensor_features(ds.X, cov, true);
      M = Xb * Xb.transpose() / static_cast<double>(n);
    }
    eigs[i] = esd(M);
    laws[i] = deformed_mp_law(in.gamma(), in.nu);
    const double ks = ks_distance(eigs[i], laws[i]);
    rec[i] = {{"d", d},
              {"n", n},
              {"seed", seed},
              {"ks", ks},
              {"eig_min", eigs[i].front()},
              {"eig_max", eigs[i].back()},
              {"law_atom0", laws[i].atom0_mass}};
  });
  const std::string tag = kernel_route ? "esd" : "mp_law";
  Output out;
  out.csv_header = {"d", "n", "seed", "ks"};
  for (std::size_t d : cfg.d) {
    std::vector<double> ks;
    for (std::size_t i = 0; i < jobs.size(); ++i) {
      if (jobs[i].d != d) continue;
      const json& r = rec[i];
      out.records.push_back(r);
      ks.push_back(r["ks"]);
      out.csv_rows.push_back({std::to_string(d), std::to_string(r["n"].get<std::size_t>()),
                              std::to_string(jobs[i].seed), fmt(r["ks"])});
      log << "KS statistic d=" << d << " seed=" << jobs[i].seed << ": " << fmt(r["ks"])
          << "\n";
      const std::string name =
          tag + "_d" + std::to_string(d) + "_seed" + std::to_string(jobs[i].seed) + ".svg";
      write_overlay_svg(fs::path(cfg.outdir) / name, eigs[i], laws[i],
                        tag + " d=" + std::to_string(d) + " n=" +
                            std::to_string(r["n"].get<std::size_t>()) + " KS=" + fmt(r["ks"]));
    }
    const std::size_t n = derived_n(d, cfg.alpha);
    out.summary[std::to_string(d)] = {{"n", n}, {"median_ks", median(ks)}};
    out.csv_rows.push_back({std::to_string(d), std::to_string(n), "median", fmt(median(ks))});
  }
  return out;
}

Output run_train_error(const ExperimentConfig& cfg, std::ostream& log) {
  const KernelFunction kernel = make_kernel(cfg.kernel);
  const MomentMatchedSampler sampler = make_sampler(cfg.sampler);
  const TeacherSpec tspec = parse_teacher(cfg.teacher);
  const auto jobs = seed_jobs(cfg);
  std::vector<json> rec(jobs.size());
  parallel_for(jobs.size(), [&](std::size_t i) {
    const auto [d, seed] = jobs[i];
    const std::size_t n = derived_n(d, cfg.alpha);
    const CovarianceSpec cov = make_cov(cfg.cov, d, cfg.cov_seed);
    const Dataset ds = sample_dataset(n, cov, sampler, seed);
    const TeacherModel teacher = make_teacher(tspec, cov, seed);
    const Eigen::VectorXd y = make_labels(ds, teacher, cfg.sigma_eps, seed);
    const double te = training_error(kernel_matrix(ds, kernel), y, cfg.lambda);
    rec[i] = {{"d", d}, {"n", n}, {"seed", seed}, {"train_error", te}};
  });
  Output out;
  out.csv_header = {"d", "n", "seed", "train_error", "prediction"};
  for (std::size_t d : cfg.d) {
    const std::size_t n = derived_n(d, cfg.alpha);
    const CovarianceSpec cov = make_cov(cfg.cov, d, cfg.cov_seed);
    json pred = nullptr;
    std::string pred_s;
    if (tspec.kind != TeacherModel::Kind::deterministic_sigma) {
      const RiskInputs in = risk_inputs(kernel, cov, realized_alpha(d, n), nu_choice(cfg.nu),
                                        cfg.a_star_override);
      const double p = asymptotic_training_error(in, cfg.lambda, tspec.c2, cfg.sigma_eps);
      pred = p;
      pred_s = fmt(p);
    }
    std::vector<double> te;
    for (const auto& r : rec) {
      if (r["d"] != d) continue;
      out.records.push_back(r);
      te.push_back(r["train_error"]);
      out.csv_rows.push_back({std::to_string(d), std::to_string(n),
                              std::to_string(r["seed"].get<std::uint64_t>()),
                              fmt(r["train_error"]), pred_s});
    }
    json s = {{"n", n}, {"mean_train_error", mean(te)}, {"prediction", pred}};
    if (!pred.is_null()) s["relative_error"] = mean(te) / pred.get<double>() - 1.0;
    out.summary[std::to_string(d)] = s;
    out.csv_rows.push_back({std::to_string(d), std::to_string(n), "mean", fmt(mean(te)), pred_s});
    log << "d=" << d << " n=" << n << " mean training error " << fmt(mean(te))
        << (pred.is_null() ? std::string() : " prediction " + pred_s) << "\n";
  }
  return out;
}

Output run_lambda_star(const ExperimentConfig& cfg, std::ostream& log) {
  const KernelFunction kernel = make_kernel(cfg.kernel);
  Output out;
  out.csv_header = {"d", "alpha", "lambda", "a_star", "lambda_star", "alternate"};
  for (std::size_t d : cfg.d) {
    const CovarianceSpec cov = make_cov(cfg.cov, d, cfg.cov_seed);
    const RiskInputs in =
        risk_inputs(kernel, cov, cfg.alpha, nu_choice(cfg.nu), cfg.a_star_override);
    const LambdaStar ls = lambda_star(in, cfg.lambda);
    json r = {{"d", d},
              {"alpha", cfg.alpha},
              {"lambda", cfg.lambda},
              {"a_star", in.a_star},
              {"nu_mass", in.nu_mass},
              {"lambda_star", ls.value},
              {"alternate", ls.alternate},
              {"residual", ls.residual},
              {"iterations", ls.iterations}};
    out.records.push_back(r);
    out.summary[std::to_string(d)] = {{"lambda_star", ls.value}};
    out.csv_rows.push_back({std::to_string(d), fmt(cfg.alpha), fmt(cfg.lambda), fmt(in.a_star),
                            fmt(ls.value), fmt(ls.alternate)});
    log << std::setprecision(12) << "lambda_star = " << ls.value << " (1/m~ route "
        << ls.alternate << ")\n";
  }
  return out;
}

Output run_risk(const ExperimentConfig& cfg, std::ostream& log) {
  const KernelFunction kernel = make_kernel(cfg.kernel);
  const MomentMatchedSampler sampler = make_sampler(cfg.sampler);
  const TeacherSpec tspec = parse_teacher(cfg.teacher);
  if (tspec.kind == TeacherModel::Kind::general)
    throw ConfigError("field 'teacher': risk needs pure_quadratic or deterministic_sigma");

  // Predictions first: an inadmissible setup fails before any simulation.
  std::vector<RiskPrediction> preds;
  for (std::size_t d : cfg.d) {
    const std::size_t n = derived_n(d, cfg.alpha);
    const CovarianceSpec cov = make_cov(cfg.cov, d, cfg.cov_seed);
    if (!assumption_check(kernel).admissible())
      throw AssumptionViolation("risk: kernel '" + kernel.name() +
                                "' violates the kernel assumptions");
    const RiskInputs in = risk_inputs(kernel, cov, realized_alpha(d, n), nu_choice(cfg.nu),
                                      cfg.a_star_override);
    preds.push_back(asymptotic_risk(in, cfg.lambda, cfg.sigma_eps, tspec.kind));
  }

  const auto jobs = seed_jobs(cfg);
  std::vector<json> rec(jobs.size());
  parallel_for(jobs.size(), [&](std::size_t i) {
    const auto [d, seed] = jobs[i];
    const std::size_t n = derived_n(d, cfg.alpha);
    const CovarianceSpec cov = make_cov(cfg.cov, d, cfg.cov_seed);
    const Dataset ds = sample_dataset(n, cov, sampler, seed);
    const TeacherModel teacher = make_teacher(tspec, cov, seed);
    EmpiricalRiskOptions opt;
    opt.n_test = cfg.n_test;
    opt.n_repl = cfg.n_repl;
    opt.seed = seed;
    const RiskEstimate est = empirical_risk(ds, kernel, teacher, cfg.lambda, cfg.sigma_eps, opt);
    rec[i] = {{"d", d}, {"n", n}, {"seed", seed}, {"risk", est.mean}, {"stderr", est.stderr_}};
  });

  Output out;
  out.csv_header = {"d", "n", "seed", "risk", "stderr", "prediction"};
  for (std::size_t k = 0; k < cfg.d.size(); ++k) {
    const std::size_t d = cfg.d[k];
    const std::size_t n = derived_n(d, cfg.alpha);
    const RiskPrediction& p = preds[k];
    std::vector<double> risk;
    for (const auto& r : rec) {
      if (r["d"] != d) continue;
      out.records.push_back(r);
      risk.push_back(r["risk"]);
      out.csv_rows.push_back({std::to_string(d), std::to_string(n),
                              std::to_string(r["seed"].get<std::uint64_t>()), fmt(r["risk"]),
                              fmt(r["stderr"]), fmt(p.total)});
    }
    out.summary[std::to_string(d)] = {{"n", n},
                                      {"mean_risk", mean(risk)},
                                      {"lambda_star", p.lambda_star},
                                      {"V", p.V},
                                      {"B", p.B},
                                      {"B_rescaled", p.B_rescaled},
                                      {"prediction", p.total},
                                      {"relative_error", mean(risk) / p.total - 1.0}};
    out.csv_rows.push_back(
        {std::to_string(d), std::to_string(n), "mean", fmt(mean(risk)), "", fmt(p.total)});
    log << "d=" << d << " n=" << n << " mean risk " << fmt(mean(risk)) << " prediction "
        << fmt(p.total) << " (V " << fmt(p.V) << ", B " << fmt(p.B) << ")\n";
  }
  return out;
}

Output run_oracle_check(const ExperimentConfig& cfg, std::ostream& log) {
  const std::uint64_t seed = cfg.seeds.empty() ? 0 : cfg.seeds.front();
  Output out;
  out.csv_header = {"check", "value", "reference", "stderr", "status"};
  auto add = [&](const std::string& name, double value, double reference, double se,
                 const std::string& status) {
    out.records.push_back({{"check", name},
                           {"value", value},
                           {"reference", reference},
                           {"stderr", se},
                           {"status", status}});
    out.csv_rows.push_back({name, fmt(value), fmt(reference), fmt(se), status});
    log << std::left << std::setw(28) << name << ' ' << status << "  value " << fmt(value)
        << " reference " << fmt(reference) << "\n";
  };

  const Eigen::MatrixXd G = oracles::hermite_gram(8);
  const double gram_dev = (G - Eigen::MatrixXd::Identity(9, 9)).cwiseAbs().maxCoeff();
  add("hermite_gram_max_dev", gram_dev, 0.0, 0.0, gram_dev <= 1e-10 ? "ok" : "mismatch");

  Engine eng = make_engine(seed, Stream::monte_carlo, 99);
  std::normal_distribution<double> g;
  std::uniform_real_distribution<double> u(0.5, 1.5);
  const int d = 4;
  std::vector<double> sigma(d);
  Eigen::VectorXd xi(d), xk(d);
  for (int i = 0; i < d; ++i) {
    sigma[static_cast<std::size_t>(i)] = u(eng);
    xi[i] = g(eng);
    xk[i] = g(eng);
  }
  const oracles::WInner w = oracles::w_inner(sigma, xi, xk);
  const std::vector<std::tuple<int, int, double>> closed = {
      {3, 1, oracles::moment31(w)}, {3, 3, oracles::moment33(w)}, {4, 4, oracles::moment44(w)},
      {2, 2, oracles::moment22(w)}, {4, 2, oracles::moment42(w)}};
  for (const auto& [a, b, ref] : closed) {
    const double v = oracles::wick_moment(a, b, sigma, xi, xk).value;
    const bool ok = std::abs(v - ref) <= 1e-10 * std::max(1.0, std::abs(ref));
    add("wick_" + std::to_string(a) + std::to_string(b), v, ref, 0.0, ok ? "ok" : "mismatch");
  }

  Eigen::MatrixXd A(3, 3), Bm(3, 3);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j <= i; ++j) {
      A(i, j) = A(j, i) = g(eng) * 0.5;
      Bm(i, j) = Bm(j, i) = g(eng) * 0.5;
    }
  for (int s : {2, 3, 4}) {
    const auto mc = oracles::quadform_moment_mc(A, s, cfg.mc_draws, seed);
    const double ref = oracles::gaussian_quadform_moment(A, s);
    add("quadform_moment_" + std::to_string(s), mc.mean, ref, mc.stderr_,
        mc.within(ref) ? "ok" : "mismatch");
    if (s == 3) {
      const double printed = oracles::gaussian_quadform_alpha3_printed(A);
      add("quadform_moment_3_printed", mc.mean, printed, mc.stderr_,
          mc.within(printed) ? "ok" : "discrepancy");
    }
  }
  const auto cross = oracles::quadform_cross_mc(A, Bm, cfg.mc_draws, seed);
  const double cref = oracles::gaussian_quadform_cross(A, Bm);
  add("quadform_cross", cross.mean, cref, cross.stderr_, cross.within(cref) ? "ok" : "mismatch");

  std::size_t mismatches = 0;
  for (const auto& r : out.records) mismatches += r["status"] == "mismatch";
  out.summary = {{"checks", out.records.size()}, {"mismatches", mismatches}};
  return out;
}

void write_csv(const fs::path& path, const Output& o) {
  std::ofstream out(path);
  for (std::size_t i = 0; i < o.csv_header.size(); ++i)
    out << (i ? "," : "") << o.csv_header[i];
  out << '\n';
  for (const auto& row : o.csv_rows) {
    for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << row[i];
    out << '\n';
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Config

const std::vector<std::string>& experiment_names() {
  static const std::vector<std::string> names = {
      "approx_norm", "esd", "mp_law", "train_error", "lambda_star", "risk", "oracle_check"};
  return names;
}

std::size_t derived_n(std::size_t d, double alpha) {
  if (!(alpha > 0.0)) throw ConfigError("field 'alpha': must be > 0");
  const double n = std::round(static_cast<double>(d) * static_cast<double>(d) / (2.0 * alpha));
  if (!(n >= 1.0))
    throw ConfigError("derived n = round(d^2/(2 alpha)) is 0 for d = " + std::to_string(d));
  return static_cast<std::size_t>(n);
}

json ExperimentConfig::to_json() const {
  json j = {{"experiment", experiment},
            {"d", d},
            {"alpha", alpha},
            {"kernel", kernel},
            {"cov", cov},
            {"cov_seed", cov_seed},
            {"sampler", sampler},
            {"lambda", lambda},
            {"sigma_eps", sigma_eps},
            {"teacher", teacher},
            {"seeds", seeds},
            {"nu", nu},
            {"a_star_override", a_star_override ? json(*a_star_override) : json(nullptr)},
            {"n_test", n_test},
            {"n_repl", n_repl},
            {"mc_draws", mc_draws}};
  return j;
}

void ExperimentConfig::merge(const json& j) {
  if (!j.is_object()) throw ConfigError("config: top level must be an object");
  for (const auto& [key, v] : j.items()) {
    if (key == "experiment") {
      experiment = field_as<std::string>(v, key);
    } else if (key == "d") {
      if (v.is_array()) {
        d = field_as<std::vector<std::size_t>>(v, key);
      } else {
        d = {field_as<std::size_t>(v, key)};
      }
    } else if (key == "alpha") {
      alpha = field_as<double>(v, key);
    } else if (key == "kernel") {
      kernel = field_as<std::string>(v, key);
    } else if (key == "cov") {
      cov = field_as<std::string>(v, key);
    } else if (key == "cov_seed") {
      cov_seed = field_as<std::uint64_t>(v, key);
    } else if (key == "sampler") {
      sampler = field_as<std::string>(v, key);
    } else if (key == "lambda") {
      lambda = field_as<double>(v, key);
    } else if (key == "sigma_eps") {
      sigma_eps = field_as<double>(v, key);
    } else if (key == "teacher") {
      teacher = field_as<std::string>(v, key);
    } else if (key == "seeds") {
      // an integer N means seeds 0..N-1; an array lists them
      if (v.is_array()) {
        seeds = field_as<std::vector<std::uint64_t>>(v, key);
      } else {
        const auto count = field_as<std::uint64_t>(v, key);
        seeds.resize(count);
        std::iota(seeds.begin(), seeds.end(), 0);
      }
    } else if (key == "nu") {
      nu = field_as<std::string>(v, key);
    } else if (key == "a_star_override") {
      if (v.is_null()) {
        a_star_override.reset();
      } else {
        a_star_override = field_as<double>(v, key);
      }
    } else if (key == "n_test") {
      n_test = field_as<std::size_t>(v, key);
    } else if (key == "n_repl") {
      n_repl = field_as<std::size_t>(v, key);
    } else if (key == "mc_draws") {
      mc_draws = field_as<std::size_t>(v, key);
    } else if (key == "outdir") {
      outdir = field_as<std::string>(v, key);
    } else {
      throw ConfigError("field '" + key + "': unknown key");
    }
  }
}

void ExperimentConfig::validate() const {
  const auto& names = experiment_names();
  if (std::find(names.begin(), names.end(), experiment) == names.end())
    throw ConfigError("field 'experiment': unknown experiment '" + experiment + "'");
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw ConfigError("field 'alpha': must be > 0");
  if (d.empty()) throw ConfigError("field 'd': at least one dimension required");
  for (std::size_t v : d) {
    if (v == 0) throw ConfigError("field 'd': dimensions must be >= 1");
    derived_n(v, alpha);
  }
  if (seeds.empty()) throw ConfigError("field 'seeds': at least one seed required");
  if (!(lambda >= 0.0)) throw ConfigError("field 'lambda': must be >= 0");
  if (!(sigma_eps >= 0.0)) throw ConfigError("field 'sigma_eps': must be >= 0");
  if (nu != "finite" && nu != "limit") throw ConfigError("field 'nu': must be finite or limit");
  if (n_test == 0) throw ConfigError("field 'n_test': must be >= 1");
  if (n_repl == 0) throw ConfigError("field 'n_repl': must be >= 1");
  if (mc_draws < 2) throw ConfigError("field 'mc_draws': must be >= 2");
  if (outdir.empty()) throw ConfigError("field 'outdir': must not be empty");
  // Spec strings: parse once so mistakes surface as config errors.
  try {
    make_kernel(kernel);
    make_sampler(sampler);
    parse_teacher(teacher);
    make_cov(cov, d.front(), cov_seed);
  } catch (const qrlab::Error& e) {
    throw ConfigError(e.what());
  }
}

std::string config_hash(const ExperimentConfig& cfg) {
  const std::string text = cfg.to_json().dump();
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

json load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw ConfigError(path + ":" + std::to_string(line) + ":" + std::to_string(col) +
                      ": syntax error");
  }
}

void run_experiment(const ExperimentConfig& cfg, std::ostream& log) {
  cfg.validate();
  std::error_code ec;
  fs::create_directories(cfg.outdir, ec);
  if (ec || !fs::is_directory(cfg.outdir))
    throw ConfigError("field 'outdir': cannot create '" + cfg.outdir + "'");

  const auto t0 = std::chrono::steady_clock::now();
  Output out;
  const std::string& e = cfg.experiment;
  if (e == "approx_norm") {
    out = run_approx_norm(cfg, log);
  } else if (e == "esd") {
    out = run_spectrum(cfg, true, log);
  } else if (e == "mp_law") {
    out = run_spectrum(cfg, false, log);
  } else if (e == "train_error") {
    out = run_train_error(cfg, log);
  } else if (e == "lambda_star") {
    out = run_lambda_star(cfg, log);
  } else if (e == "risk") {
    out = run_risk(cfg, log);
  } else {
    out = run_oracle_check(cfg, log);
  }
  const auto ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();

  const std::string hash = config_hash(cfg);
  json results = {{"experiment", e},
                  {"config", cfg.to_json()},
                  {"config_hash", hash},
                  {"records", out.records},
                  {"summary", out.summary}};
  const fs::path dir(cfg.outdir);
  std::ofstream(dir / "results.json") << results.dump(2) << '\n';
  write_csv(dir / "results.csv", out);
  json timing = {{"config_hash", hash}, {"runtime_ms", ms}, {"max_workers", worker_cap()}};
  std::ofstream(dir / "timing.json") << timing.dump(2) << '\n';
  log << "config hash " << hash << ", results in " << cfg.outdir << "\n";
}

// ---------------------------------------------------------------------------
// Command line

int main_entry(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Kernel ridge regression in the quadratic regime: experiment runner"};
  app.footer(kColumnsHelp);
  app.require_subcommand(1);

  std::string experiment, config_path, d, alpha, kernel, cov, cov_seed, sampler, lambda,
      sigma_eps, teacher, seeds, seed_list, nu, a_star, n_test, n_repl, mc_draws, outdir;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON config file; flags override its fields");
    sub->add_option("--d", d, "Dimension(s), comma separated");
    sub->add_option("--alpha", alpha, "d^2/(2n); n = round(d^2/(2 alpha))");
    sub->add_option("--kernel", kernel, "Kernel spec");
    sub->add_option("--cov", cov, "Covariance spec");
    sub->add_option("--cov-seed", cov_seed, "Seed for random covariance diagonals");
    sub->add_option("--sampler", sampler, "Entry sampler spec");
    sub->add_option("--lambda", lambda, "Ridge parameter");
    sub->add_option("--sigma-eps", sigma_eps, "Label noise level");
    sub->add_option("--teacher", teacher, "Teacher spec");
    sub->add_option("--seeds", seeds, "Number of seeds N (runs seeds 0..N-1)");
    sub->add_option("--seed-list", seed_list, "Explicit seeds, comma separated");
    sub->add_option("--nu", nu, "finite (C(d+1,2) atoms) or limit");
    sub->add_option("--a-star-override", a_star, "Use this a_* instead of the kernel's");
    sub->add_option("--n-test", n_test, "Test points for risk");
    sub->add_option("--n-repl", n_repl, "Noise/teacher replicates for risk");
    sub->add_option("--mc-draws", mc_draws, "Monte Carlo draws for oracle_check");
    sub->add_option("--out", outdir, "Output directory");
  };
  CLI::App* run = app.add_subcommand("run", "Run one experiment");
  run->add_option("experiment", experiment,
                  "approx_norm | esd | mp_law | train_error | lambda_star | risk | "
                  "oracle_check");
  add_common(run);
  CLI::App* oracle = app.add_subcommand("oracle-check", "Run the oracle suite");
  add_common(oracle);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? 0 : 1;
  }

  ExperimentConfig cfg;
  try {
    if (!config_path.empty()) cfg.merge(load_config_file(config_path));
    if (oracle->parsed()) cfg.experiment = "oracle_check";
    if (!experiment.empty()) cfg.experiment = experiment;

    auto given = [&](const char* flag) {
      CLI::App* sub = oracle->parsed() ? oracle : run;
      return sub->count(flag) > 0;
    };
    if (given("--d")) {
      cfg.d.clear();
      for (const auto& p : split(d, ',')) cfg.d.push_back(to_uint("d", p));
    }
    if (given("--alpha")) cfg.alpha = to_double("alpha", alpha);
    if (given("--kernel")) cfg.kernel = kernel;
    if (given("--cov")) cfg.cov = cov;
    if (given("--cov-seed")) cfg.cov_seed = to_uint("cov_seed", cov_seed);
    if (given("--sampler")) cfg.sampler = sampler;
    if (given("--lambda")) cfg.lambda = to_double("lambda", lambda);
    if (given("--sigma-eps")) cfg.sigma_eps = to_double("sigma_eps", sigma_eps);
    if (given("--teacher")) cfg.teacher = teacher;
    if (given("--seeds")) {
      cfg.seeds.resize(to_uint("seeds", seeds));
      std::iota(cfg.seeds.begin(), cfg.seeds.end(), 0);
    }
    if (given("--seed-list")) {
      cfg.seeds.clear();
      for (const auto& p : split(seed_list, ',')) cfg.seeds.push_back(to_uint("seeds", p));
    }
    if (given("--nu")) cfg.nu = nu;
    if (given("--a-star-override")) cfg.a_star_override = to_double("a_star_override", a_star);
    if (given("--n-test")) cfg.n_test = to_uint("n_test", n_test);
    if (given("--n-repl")) cfg.n_repl = to_uint("n_repl", n_repl);
    if (given("--mc-draws")) cfg.mc_draws = to_uint("mc_draws", mc_draws);
    if (given("--out")) cfg.outdir = outdir;
    if (cfg.experiment.empty()) throw ConfigError("field 'experiment': missing");
    cfg.validate();
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return 1;
  }

  try {
    run_experiment(cfg, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return 1;
  } catch (const AssumptionViolation& e) {
    err << "assumption violation: " << e.what() << "\n";
    return 2;
  } catch (const NumericalFailure& e) {
    err << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const qrlab::Error& e) {
    // InvalidArgument / CapacityError: the config asked for something unsupported
    err << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}

}  // namespace qrlab::cli
