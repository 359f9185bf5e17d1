// charlab command-line driver: batch commands writing CSV/JSON with a run
// manifest next to every output file.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "charlab/charlab.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace charlab;

namespace {

constexpr const char* version = "1.0.0";

enum Exit : int { ok = 0, threshold = 1, usage = 2, resource = 3 };

struct usage_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 14695981039346656037ULL;
  for (const unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string fmt(double x) { return format_sig12(x); }

class Csv {
 public:
  explicit Csv(const std::vector<std::string>& header) { row(header); }

  void row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out_ << ',';
      const std::string& c = cells[i];
      if (c.find_first_of(",\"") == std::string::npos) {
        out_ << c;
        continue;
      }
      out_ << '"';
      for (const char ch : c) out_ << (ch == '"' ? "\"\"" : std::string(1, ch));
      out_ << '"';
    }
    out_ << '\n';
  }
  void comment(const std::string& text) { out_ << "# " << text << '\n'; }
  std::string str() const { return out_.str(); }

 private:
  std::ostringstream out_;
};

// Outputs of one command plus the manifest written beside them.
class Run {
 public:
  Run(std::string command, const CLI::App* sub, std::uint64_t seed)
      : command_(std::move(command)), start_(std::chrono::steady_clock::now()) {
    params_ = json::object();
    for (const CLI::Option* opt : sub->get_options()) {
      const std::string name = opt->get_name(false, true);
      if (name.empty() || name == "--help") continue;
      const std::string key = opt->get_lnames().empty() ? name : opt->get_lnames().front();
      if (opt->count() > 0) {
        const auto& res = opt->results();
        if (opt->get_type_size() == 0) params_[key] = true;
        else if (res.size() == 1) params_[key] = res.front();
        else params_[key] = res;
      } else if (!opt->get_default_str().empty()) {
        params_[key] = opt->get_default_str();
      }
    }
    seed_ = seed;
  }

  // Writes `text` to `path`, or to stdout when no path is set.
  void emit(const std::optional<std::string>& path, const std::string& text) {
    if (!path) {
      std::cout << text;
      return;
    }
    const fs::path p(*path);
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream f(p, std::ios::binary);
    if (!f) throw usage_error("cannot write " + *path);
    f << text;
    outputs_.push_back({{"path", p.filename().string()}, {"bytes", text.size()}, {"fnv1a64", hex64(fnv1a64(text))}});
    manifest_path_ = p.string() + ".manifest.json";
  }

  void set_manifest_path(std::string p) { manifest_path_ = std::move(p); }
  void note(const std::string& key, json value) { extra_[key] = std::move(value); }

  void finish(int exit_code) {
    if (!manifest_path_) return;
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    json m;
    m["command"] = command_;
    m["parameters"] = params_;
    m["seed"] = seed_;
    m["threads"] = max_threads();
    m["versions"] = {{"charlab", version}, {"compiler", __VERSION__}, {"cplusplus", __cplusplus}};
    m["wall_time_s"] = wall;
    m["exit_code"] = exit_code;
    m["outputs"] = outputs_;
    if (!extra_.empty()) m["summary"] = extra_;
    std::ofstream f(*manifest_path_, std::ios::binary);
    f << m.dump(2) << '\n';
  }

 private:
  std::string command_;
  std::chrono::steady_clock::time_point start_;
  json params_;
  std::uint64_t seed_ = 0;
  json outputs_ = json::array();
  json extra_ = json::object();
  std::optional<std::string> manifest_path_;
};

std::uint64_t as_count(double v, const char* what) {
  if (!(v >= 0.0) || v != std::floor(v) || v > 1e18) {
    throw usage_error(std::string(what) + " must be a non-negative integer");
  }
  return static_cast<std::uint64_t>(v);
}

std::pair<std::uint64_t, std::uint64_t> parse_range(const std::string& text, const char* what) {
  const auto colon = text.find(':');
  try {
    if (colon == std::string::npos) {
      const auto v = as_count(std::stod(text), what);
      return {v, v};
    }
    return {as_count(std::stod(text.substr(0, colon)), what), as_count(std::stod(text.substr(colon + 1)), what)};
  } catch (const std::invalid_argument&) {
    throw usage_error(std::string(what) + ": expected lo:hi, got '" + text + "'");
  }
}

std::uint64_t table_bound(double x) { return std::max<std::uint64_t>(100, static_cast<std::uint64_t>(std::ceil(x))); }

std::string scan_row_parity(int parity) { return parity < 0 ? "odd" : "even"; }

std::vector<std::string> scan_cells(const ScanRecord& r) {
  return {std::to_string(r.q),    r.id,           std::to_string(r.order), scan_row_parity(r.parity),
          std::to_string(r.conductor), fmt(r.M), fmt(r.M_over_sqrtq), fmt(r.envelope_ratio)};
}

const std::vector<std::string> scan_header = {"q", "char", "order", "parity", "conductor", "M", "M_over_sqrtq",
                                              "envelope_ratio"};

// ---------------------------------------------------------------- msum
struct MsumArgs {
  std::optional<std::uint64_t> q;
  std::string chr;
  bool all = false;
  std::string range;
  std::uint64_t order = 0;
  bool primitive = false;
  double max_work = 2e11;
  std::optional<std::string> out;
};

int cmd_msum(const MsumArgs& args, Run& run) {
  Csv csv(scan_header);
  std::vector<ScanRecord> records;
  int code = ok;
  MsumArgs a = args;
  // A bare --char carries its modulus in the id.
  if (!a.q && !a.chr.empty() && a.range.empty()) {
    const auto colon = a.chr.find(':');
    if (colon == std::string::npos || colon == 0) throw usage_error("--char expects q:e1,e2,...");
    try {
      std::size_t used = 0;
      a.q = std::stoull(a.chr.substr(0, colon), &used);
      if (used != colon) throw usage_error("--char expects q:e1,e2,...");
    } catch (const std::logic_error&) {
      throw usage_error("--char expects q:e1,e2,...");
    }
  }
  if (a.q) {
    const std::uint64_t q = *a.q;
    if (q < 3) throw usage_error("no primitive non-principal characters modulo " + std::to_string(q));
    if (a.chr.empty() == !a.all) throw usage_error("msum --q needs exactly one of --char or --all");
    const PrimeTable table(table_bound(static_cast<double>(q)));
    const GroupPtr group = build_group(q, table);
    std::vector<DirichletCharacter> chars;
    if (a.all) {
      CharacterFilter f;
      f.non_principal = true;
      f.primitive_only = a.primitive;
      if (a.order) f.exact_order = a.order;
      chars = enumerate_characters(group, f);
    } else {
      chars.push_back(parse_character(a.chr, group));
      if (chars.back().is_principal()) throw usage_error("msum: the principal character has unbounded partial sums");
    }
    const PeriodSummer summer(group);
    std::vector<ScanRecord> recs(chars.size());
    parallel_for(chars.size(), [&](std::size_t i) { recs[i] = make_record(chars[i], summer.profile(chars[i])); });
    double running = 0.0;
    for (auto& r : recs) {
      running = std::max(running, r.M_over_sqrtq);
      r.running_max = running;
      csv.row(scan_cells(r));
    }
    records = std::move(recs);
  } else if (!a.range.empty()) {
    const auto [lo, hi] = parse_range(a.range, "--range");
    const PrimeTable table(table_bound(static_cast<double>(hi)));
    ScanLimits lim;
    lim.max_work = static_cast<std::uint64_t>(a.max_work);
    ScanResult res;
    if (a.order >= 3 && a.order % 2 == 1) {
      res = scan_family(lo, hi, a.order, a.primitive, table, lim);
    } else {
      CharacterFilter f;
      f.primitive_only = a.primitive;
      if (a.order) f.exact_order = a.order;
      res = scan_all(lo, hi, f, table, lim);
    }
    for (const auto& r : res.records) csv.row(scan_cells(r));
    if (res.truncated) {
      csv.comment("truncated after q=" + std::to_string(res.last_complete_q) + ": " + res.truncation_reason);
      code = resource;
    }
    run.note("running_max_M_over_sqrtq", res.records.empty() ? 0.0 : res.records.back().running_max);
    records = std::move(res.records);
  } else {
    throw usage_error("msum needs --q or --range");
  }
  const PolyaVinogradovReport pv = polya_vinogradov_check(records);
  run.note("rows", records.size());
  run.note("polya_vinogradov_violations", pv.violations.size());
  run.note("max_M_over_sqrtq_logq", pv.max_ratio);
  run.emit(a.out, csv.str());
  if (!pv.ok()) {
    std::cerr << "msum: " << pv.violations.size() << " characters exceed sqrt(q) log q\n";
    if (code == ok) code = threshold;
  }
  return code;
}

// ---------------------------------------------------------- identities
struct IdentityArgs {
  std::string g = "3:15";
  std::string k = "1:300";
  double tol = 1e-10;
  std::optional<std::string> out;
};

int cmd_identities(const IdentityArgs& a, Run& run) {
  const auto [g_lo, g_hi] = parse_range(a.g, "--g");
  const auto [k_lo, k_hi] = parse_range(a.k, "--k");
  Csv csv({"g", "k", "lhs", "rhs", "abs_err"});
  double worst = 0.0, worst_exact = 0.0, worst_z = 0.0, worst_sj = 0.0, min_cos = 1.0;
  std::size_t rows = 0, failing = 0;
  for (std::uint64_t g = std::max<std::uint64_t>(g_lo, 3); g <= g_hi; ++g) {
    if (g % 2 == 0) continue;
    for (std::uint64_t k = std::max<std::uint64_t>(k_lo, 1); k <= k_hi; ++k) {
      const MeanIdentity m = mean_identity(g, k);
      csv.row({std::to_string(g), std::to_string(k), fmt(m.lhs), fmt(m.rhs), fmt(m.abs_err())});
      ++rows;
      worst = std::max(worst, m.abs_err());
      worst_exact = std::max(worst_exact, std::abs(m.lhs - m.exact));
      if (m.abs_err() > a.tol) ++failing;
      for (std::uint64_t ell = 0; ell < k; ++ell) {
        const ZChoice z = select_z(ell, k, g);
        worst_z = std::max(worst_z, std::abs(z.cos_value - z.direct));
        min_cos = std::min(min_cos, z.cos_value);
      }
      if (m.k_star >= 2 && std::gcd(g, m.k_star) == 1) {
        worst_sj = std::max(worst_sj, sj_table(g, m.k_star).max_discrepancy);
      }
    }
  }
  run.note("rows", rows);
  run.note("max_abs_err", worst);
  run.note("rows_over_tolerance", failing);
  run.note("max_err_vs_parity_closed_form", worst_exact);
  run.note("max_select_z_err", worst_z);
  run.note("min_cos_value", min_cos);
  run.note("max_sj_discrepancy", worst_sj);
  run.emit(a.out, csv.str());
  std::cerr << "identities: rows=" << rows << " max_abs_err=" << fmt(worst) << " over_tol=" << failing
            << " parity_closed_form_err=" << fmt(worst_exact) << " select_z_err=" << fmt(worst_z)
            << " min_cos=" << fmt(min_cos) << " sj_err=" << fmt(worst_sj) << '\n';
  const bool bad = worst > a.tol || worst_z > 1e-12 || (rows > 0 && !(min_cos > 0.0)) || worst_sj > a.tol;
  return bad ? threshold : ok;
}

// ----------------------------------------------------------------- cma
struct CmaArgs {
  std::vector<std::uint64_t> m;
  double X = 1e6;
  std::optional<std::string> out;
};

int cmd_cma(const CmaArgs& a, Run& run) {
  if (a.m.empty()) throw usage_error("cma needs --m");
  const PrimeTable table(table_bound(std::max(a.X, static_cast<double>(*std::max_element(a.m.begin(), a.m.end())))));
  Csv csv({"m", "a", "value"});
  double worst = 0.0;
  for (const auto m : a.m) {
    const CmaCalculator cma(m, a.X, table);
    NeumaierSum row;
    for (std::uint64_t r = 1; r < m; ++r) {
      if (std::gcd(r, m) != 1) continue;
      const CmaValue v = cma.c_m_a(r);
      row.add(v.value);
      csv.row({std::to_string(m), std::to_string(r), fmt(v.value)});
    }
    worst = std::max(worst, std::abs(row.value() - cma.row_sum_target()));
  }
  run.note("max_row_sum_err", worst);
  run.emit(a.out, csv.str());
  std::cerr << "cma: max row-sum error " << fmt(worst) << '\n';
  return worst <= 1e-8 ? ok : threshold;
}

// ------------------------------------------------------------------ lz
struct LzArgs {
  std::vector<std::uint64_t> m;
  std::vector<std::uint64_t> a;
  std::vector<double> y = {1e4, 1e5, 1e6, 1e7};
  double X = 1e7;
  bool corrected = false;
  std::optional<std::string> out;
};

int cmd_lz(const LzArgs& a, Run& run) {
  if (a.m.empty() || a.y.empty()) throw usage_error("lz needs --m and --y");
  const double ymax = *std::max_element(a.y.begin(), a.y.end());
  const PrimeTable table(table_bound(std::max(ymax, a.X)));
  std::vector<std::string> header = {"m", "a", "y", "residual"};
  if (a.corrected) header.push_back("corrected");
  Csv csv(header);
  std::size_t violations = 0;
  for (const auto m : a.m) {
    const CmaCalculator cma(m, a.X, table);
    std::vector<std::uint64_t> as = a.a;
    if (as.empty()) {
      for (std::uint64_t r = 1; r < m; ++r) {
        if (std::gcd(r, m) == 1) as.push_back(r);
      }
    }
    for (const auto r : as) {
      if (std::gcd(r, m) != 1) throw usage_error("lz: gcd(a, m) must be 1");
      std::vector<double> res;
      for (const double y : a.y) {
        const LzResidual z = lz_residual(cma, r, y, table);
        std::vector<std::string> cells = {std::to_string(m), std::to_string(r), fmt(y), fmt(z.residual)};
        if (a.corrected) cells.push_back(fmt(z.corrected));
        csv.row(cells);
        res.push_back(a.corrected ? z.corrected : z.residual);
      }
      if (res.size() >= 2 && (std::abs(res.back()) > std::abs(res.front()) || std::abs(res.back()) > 0.02)) {
        ++violations;
      }
    }
  }
  run.note("pairs_violating_decay", violations);
  run.emit(a.out, csv.str());
  return violations ? threshold : ok;
}

// --------------------------------------------------------------- coset
struct CosetArgs {
  std::uint64_t m = 0;
  std::string psi = "primitive";
  double X = 1e6;
  std::optional<std::string> out;
};

std::vector<DirichletCharacter> select_psis(const std::string& spec, const GroupPtr& group) {
  CharacterFilter f;
  f.non_principal = true;
  if (spec == "quadratic") {
    f.exact_order = 2;
    auto v = enumerate_characters(group, f);
    if (v.empty()) throw usage_error("no quadratic character modulo " + std::to_string(group->modulus()));
    v.erase(v.begin() + 1, v.end());
    return v;
  }
  if (spec == "primitive") {
    f.primitive_only = true;
    return enumerate_characters(group, f);
  }
  if (spec == "all") return enumerate_characters(group, f);
  if (spec == "odd") {
    f.parity = -1;
    f.primitive_only = true;
    return enumerate_characters(group, f);
  }
  return {parse_character(spec, group)};
}

int cmd_coset(const CosetArgs& a, Run& run) {
  if (a.m < 3) throw usage_error("coset needs --m >= 3");
  const PrimeTable table(table_bound(std::max(a.X, static_cast<double>(a.m))));
  const CmaCalculator cma(a.m, a.X, table);
  Csv csv({"m", "psi", "ell", "lhs", "rhs", "err"});
  double worst = 0.0;
  std::size_t bad_card = 0;
  for (const auto& psi : select_psis(a.psi, cma.group())) {
    if (psi.is_principal()) throw usage_error("coset: psi must be non-principal");
    for (std::uint64_t ell = 0; ell < psi.order(); ++ell) {
      const CosetCheck c = coset_identity_check(psi, ell, cma);
      csv.row({std::to_string(a.m), psi.id(), std::to_string(ell), fmt(c.lhs), fmt(c.rhs), fmt(c.abs_err)});
      worst = std::max(worst, c.abs_err);
      if (!c.cardinality_ok()) ++bad_card;
    }
  }
  run.note("max_abs_err", worst);
  run.note("cardinality_failures", bad_card);
  run.emit(a.out, csv.str());
  return worst <= 1e-3 && bad_card == 0 ? ok : threshold;
}

// ---------------------------------------------------------- controlerr
struct ControlArgs {
  std::string m = "5:101";
  std::uint64_t g = 3;
  std::string psi = "odd";
  std::optional<double> P;
  std::string preset = "desk";
  double X = 1e6;
  std::optional<std::string> out;
};

int cmd_controlerr(const ControlArgs& a, Run& run) {
  if (a.g < 3 || a.g % 2 == 0) throw usage_error("controlerr: g must be odd and >= 3");
  const Preset preset = parse_preset(a.preset);
  const auto [lo, hi] = parse_range(a.m, "--m");
  const PrimeTable table(table_bound(std::max({a.X, static_cast<double>(hi), a.P.value_or(0.0), 100.0 * std::log(static_cast<double>(std::max<std::uint64_t>(hi, 3)))})));
  Csv csv({"m", "psi", "k", "k_star", "P", "lhs", "rhs", "abs_err"});
  double worst = 0.0;
  for (std::uint64_t m = std::max<std::uint64_t>(lo, 3); m <= hi; ++m) {
    if (!is_prime_u64(m)) continue;
    const CmaCalculator cma(m, a.X, table);
    PipelineConfig cfg;
    cfg.preset = preset;
    cfg.P = a.P;
    const double P = cfg.P_for(m);
    for (const auto& psi : select_psis(a.psi, cma.group())) {
      if (psi.is_principal()) continue;
      const ControlErrCheck c = control_err_check(psi, a.g, P, cma, table);
      csv.row({std::to_string(m), psi.id(), std::to_string(c.k), std::to_string(c.k_star), fmt(P), fmt(c.lhs),
               fmt(c.rhs), fmt(c.abs_err)});
      worst = std::max(worst, c.abs_err);
    }
  }
  run.note("max_abs_err", worst);
  run.emit(a.out, csv.str());
  return ok;
}

// ----------------------------------------------------------- construct
json report_json(const ConstructionReport& r) {
  const PipelineConfig& c = r.config;
  json j;
  j["ok"] = r.ok;
  j["failed_stage"] = r.failed_stage.empty() ? json(nullptr) : json(r.failed_stage);
  j["message"] = r.message;
  j["config"] = {{"M", c.M},
                 {"M_low", c.low()},
                 {"g", c.g},
                 {"delta", c.delta},
                 {"preset", to_string(c.preset)},
                 {"P_agree", c.P_agree},
                 {"Y", c.Y},
                 {"q_budget", c.q_budget},
                 {"products", c.products},
                 {"X", c.X},
                 {"sampling", c.bujold.sampling},
                 {"seed", c.bujold.seed}};
  json stages = json::array();
  for (const auto& s : r.stages) stages.push_back({{"stage", s.name}, {"ok", s.ok}, {"detail", s.detail}});
  j["stages"] = stages;
  j["sifted"] = {{"count", r.sifted_count},
                 {"usable", r.sifted_usable},
                 {"prediction", r.sifted_prediction},
                 {"threshold", r.sift_threshold}};
  if (r.m == 0) return j;
  j["m"] = r.m;
  j["m_minus_1"] = r.m_minus_1;
  j["pminus"] = r.pminus == 0 ? json("inf") : json(r.pminus);
  j["T"] = r.T;
  j["N"] = r.N;
  j["P"] = r.P;
  j["bujold"] = {{"count", r.bujold_count}, {"predicted", r.bujold_predicted}, {"m_attempts", r.m_attempts}};
  j["psi"] = {{"id", r.psi_id},
              {"k", r.k},
              {"parity", r.psi_parity},
              {"max_small_arg", r.max_small_arg},
              {"small_order_count", r.small_order_count}};
  if (r.q == 0) return j;
  j["chi"] = {{"q", r.q},
              {"id", r.chi_id},
              {"order", r.chi_order},
              {"conductor", r.chi_conductor},
              {"agreement", r.agreement}};
  if (r.decomposition) {
    const auto& d = *r.decomposition;
    json dj = {{"y", d.y},       {"P", d.P},
               {"k", d.k},       {"k_star", d.k_star},
               {"g_star", d.g_star}, {"S", d.S_exact},
               {"main_term", d.main_term}, {"small_prime_term", d.small_prime_term},
               {"residual", d.residual}};
    if (d.has_with_sj) {
      dj["with_sj_value"] = d.with_sj_value;
      dj["with_sj_residual"] = d.with_sj_residual;
    }
    j["decomposition"] = dj;
  }
  if (!r.ok) return j;
  j["distance"] = {{"Y", c.Y},
                   {"D2_Y", r.D2_Y},
                   {"S_Y", r.S_Y},
                   {"prime_sum_Y", r.prime_sum_Y},
                   {"distance_residual", r.distance_residual},
                   {"distance_exact_gap", r.distance_exact_gap},
                   {"bookkeeping_bound", r.bookkeeping_bound},
                   {"bookkeeping_consistent", r.bookkeeping_consistent}};
  j["lower_bound"] = {{"Q", r.Q},
                      {"D2_Q", r.D2_Q},
                      {"proxy", r.lower_bound_proxy},
                      {"coupling_m_target", std::isfinite(r.coupling_m_target) ? json(r.coupling_m_target) : json(nullptr)}};
  return j;
}

struct ConstructArgs {
  double M = 20000;
  std::uint64_t g = 3;
  std::string preset = "desk";
  std::optional<std::string> config;
  std::vector<std::string> set;
  std::optional<std::string> out;
  std::uint64_t seed = 0;
  bool seed_given = false;
};

int cmd_construct(const ConstructArgs& a, const CLI::App* sub, Run& run) {
  PipelineConfig cfg;
  if (a.config) {
    std::ifstream in(*a.config);
    if (!in) throw usage_error("cannot read config " + *a.config);
    load_config(cfg, in);
  }
  // Command-line values override the file only when given explicitly.
  if (sub->count("--M") || !a.config) cfg.M = as_count(a.M, "--M");
  if (sub->count("--g") || !a.config) cfg.g = a.g;
  if (sub->count("--preset") || !a.config) cfg.preset = parse_preset(a.preset);
  if (a.seed_given || !a.config) cfg.bujold.seed = a.seed;
  for (const auto& kv : a.set) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw usage_error("--set expects key=value, got '" + kv + "'");
    apply_setting(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (cfg.g < 3 || cfg.g % 2 == 0) throw usage_error("g must be odd and >= 3, got " + std::to_string(cfg.g));
  if (cfg.M < 3) throw usage_error("M must be >= 3");
  const PrimeTable table(cfg.table_limit());
  const ConstructionReport r = run_pipeline(cfg, table);

  Csv csv({"stage", "item", "metric", "value"});
  for (const auto& c : r.candidates) csv.row({c.stage, c.item, c.metric, fmt(c.value)});
  const std::string report = report_json(r).dump(2) + "\n";
  if (a.out) {
    run.emit(*a.out + ".json", report);
    run.emit(*a.out + ".csv", csv.str());
    run.set_manifest_path(*a.out + ".manifest.json");
  } else {
    std::cout << report;
  }
  run.note("ok", r.ok);
  if (!r.ok) {
    std::cerr << "construct: stage " << r.failed_stage << " failed: " << r.message << '\n';
    return threshold;
  }
  const bool pass = r.agreement >= 0.9 && r.bookkeeping_consistent;
  return pass ? ok : threshold;
}

// ------------------------------------------------------------ plotdata
struct PlotArgs {
  std::string in;
  std::string spec;
  std::optional<std::string> out;
};

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name) const {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw schema_error("missing column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
  }
};

// Splits one CSV line; quoted cells may hold commas and doubled quotes.
std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cells.back() += '"';
        ++i;
      } else if (ch == '"') {
        quoted = false;
      } else {
        cells.back() += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      cells.emplace_back();
    } else {
      cells.back() += ch;
    }
  }
  return cells;
}

Table read_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw usage_error("cannot read " + path);
  Table t;
  std::string line;
  bool first = true;
  while (std::getline(f, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cells = split_csv_line(line);
    if (first) {
      t.header = std::move(cells);
      first = false;
    } else {
      if (cells.size() != t.header.size()) throw schema_error("ragged row in " + path);
      t.rows.push_back(std::move(cells));
    }
  }
  if (first) throw schema_error(path + " has no header");
  return t;
}

double cell_value(const std::string& s) {
  try {
    return std::stod(s);
  } catch (const std::exception&) {
    throw schema_error("non-numeric cell '" + s + "'");
  }
}

// Specs: "envelope" (scan CSV: loglog q vs M/sqrt q, sorted by q),
// "residual" (lz CSV: log10 y vs residual), or "x=COL,y=COL[,logx]".
int cmd_plotdata(const PlotArgs& a, Run& run) {
  const Table t = read_csv(a.in);
  std::string xcol, ycol, xname, sort_col;
  enum class Xform { none, loglog, log10 } xf = Xform::none;
  if (a.spec == "envelope") {
    xcol = "q";
    ycol = "M_over_sqrtq";
    xf = Xform::loglog;
    xname = "loglog_q";
    sort_col = "q";
  } else if (a.spec == "residual") {
    xcol = "y";
    ycol = "residual";
    xf = Xform::log10;
    xname = "log10_y";
  } else {
    std::stringstream ss(a.spec);
    std::string part;
    while (std::getline(ss, part, ',')) {
      if (part.rfind("x=", 0) == 0) xcol = part.substr(2);
      else if (part.rfind("y=", 0) == 0) ycol = part.substr(2);
      else if (part == "logx") xf = Xform::log10;
      else throw usage_error("plotdata: unknown spec item '" + part + "'");
    }
    if (xcol.empty() || ycol.empty()) throw usage_error("plotdata: spec needs x= and y=");
    xname = xf == Xform::log10 ? "log10_" + xcol : xcol;
  }
  const std::size_t xi = t.column(xcol), yi = t.column(ycol);
  std::vector<std::pair<double, std::vector<std::string>>> out;
  for (const auto& row : t.rows) {
    const double x = cell_value(row[xi]);
    double xv = x;
    if (xf == Xform::loglog) xv = std::log(std::log(x));
    if (xf == Xform::log10) xv = std::log10(x);
    const double key = sort_col.empty() ? static_cast<double>(out.size()) : cell_value(row[t.column(sort_col)]);
    out.push_back({key, {fmt(xv), row[yi]}});
  }
  std::stable_sort(out.begin(), out.end(), [](const auto& l, const auto& r) { return l.first < r.first; });
  Csv csv({xname, ycol});
  for (const auto& [k, cells] : out) csv.row(cells);
  run.note("rows", out.size());
  run.emit(a.out, csv.str());
  return ok;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"charlab: Dirichlet character sums, pretentious distances and extremal constructions"};
  app.require_subcommand(1);
  unsigned threads = 0;
  std::uint64_t seed = 0;
  app.add_option("--threads", threads, "Worker cap (0 = all cores)");
  app.add_option("--seed", seed, "Seed for sampled scans")->capture_default_str();
  app.fallthrough();

  MsumArgs ms;
  auto* msum = app.add_subcommand("msum", "Maximal partial sums M(chi)");
  msum->add_option("--q", ms.q, "Modulus");
  msum->add_option("--char", ms.chr, "Character id q:e1,e2,...");
  msum->add_flag("--all", ms.all, "All non-principal characters mod q");
  msum->add_option("--range", ms.range, "Modulus range lo:hi");
  msum->add_option("--order", ms.order, "Exact character order (0 = any)");
  msum->add_flag("--primitive", ms.primitive, "Primitive characters only");
  msum->add_option("--max-work", ms.max_work, "Budget on sum of q over characters")->capture_default_str();
  msum->add_option("--out", ms.out, "CSV output path");

  IdentityArgs id;
  auto* ident = app.add_subcommand("identities", "Mean identity, z_l and S_j sweeps");
  ident->add_option("--g", id.g, "Odd g range lo:hi")->capture_default_str();
  ident->add_option("--k", id.k, "k range lo:hi")->capture_default_str();
  ident->add_option("--tol", id.tol, "Tolerance on abs_err")->capture_default_str();
  ident->add_option("--out", id.out, "CSV output path");

  CmaArgs ca;
  auto* cma = app.add_subcommand("cma", "C_m(a) table");
  cma->add_option("--m", ca.m, "Moduli")->delimiter(',')->required();
  cma->add_option("--X", ca.X, "Euler product truncation")->capture_default_str();
  cma->add_option("--out", ca.out, "CSV output path");

  LzArgs lz;
  auto* lzc = app.add_subcommand("lz", "Residuals of prime sums in progressions against C_m(a)");
  lzc->add_option("--m", lz.m, "Moduli")->delimiter(',')->required();
  lzc->add_option("--a", lz.a, "Residues (default: all coprime)")->delimiter(',');
  lzc->add_option("--y", lz.y, "Cutoffs")->delimiter(',')->capture_default_str();
  lzc->add_option("--X", lz.X, "Euler product truncation")->capture_default_str();
  lzc->add_flag("--corrected", lz.corrected, "Also report the prime-power corrected residual");
  lzc->add_option("--out", lz.out, "CSV output path");

  CosetArgs co;
  auto* coset = app.add_subcommand("coset", "Coset identity for C_m(a)");
  coset->add_option("--m", co.m, "Modulus")->required();
  coset->add_option("--psi", co.psi, "quadratic | primitive | odd | all | character id")->capture_default_str();
  coset->add_option("--X", co.X, "Euler product truncation")->capture_default_str();
  coset->add_option("--out", co.out, "CSV output path");

  ControlArgs ce;
  auto* ctrl = app.add_subcommand("controlerr", "S_j-weighted log K/L against the small-prime sum");
  ctrl->add_option("--m", ce.m, "Prime modulus range lo:hi")->capture_default_str();
  ctrl->add_option("--g", ce.g, "Odd order g")->capture_default_str();
  ctrl->add_option("--psi", ce.psi, "quadratic | primitive | odd | all | character id")->capture_default_str();
  ctrl->add_option("--P", ce.P, "Small-prime threshold (default from preset)");
  ctrl->add_option("--preset", ce.preset, "desk | paper")->capture_default_str();
  ctrl->add_option("--X", ce.X, "Euler product truncation")->capture_default_str();
  ctrl->add_option("--out", ce.out, "CSV output path");

  ConstructArgs cs;
  auto* cons = app.add_subcommand("construct", "Extremal character pipeline");
  cons->add_option("--M", cs.M, "Upper end of the m range")->capture_default_str();
  cons->add_option("--g", cs.g, "Odd order of chi")->capture_default_str();
  cons->add_option("--preset", cs.preset, "desk | paper")->capture_default_str();
  cons->add_option("--config", cs.config, "key = value config file");
  cons->add_option("--set", cs.set, "Override key=value (repeatable)");
  cons->add_option("--out", cs.out, "Output prefix (PREFIX.json, PREFIX.csv)");

  PlotArgs pa;
  auto* plot = app.add_subcommand("plotdata", "Columnar plot data from a CSV");
  plot->add_option("--in", pa.in, "Input CSV")->required();
  plot->add_option("--spec", pa.spec, "envelope | residual | x=COL,y=COL[,logx]")->required();
  plot->add_option("--out", pa.out, "Output path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return usage;
  }
  set_max_threads(threads);
  cs.seed = seed;

  CLI::App* sub = app.get_subcommands().front();
  Run run(sub->get_name(), sub, seed);
  int code = ok;
  try {
    if (sub == msum) code = cmd_msum(ms, run);
    else if (sub == ident) code = cmd_identities(id, run);
    else if (sub == cma) code = cmd_cma(ca, run);
    else if (sub == lzc) code = cmd_lz(lz, run);
    else if (sub == coset) code = cmd_coset(co, run);
    else if (sub == ctrl) code = cmd_controlerr(ce, run);
    else if (sub == cons) {
      cs.seed_given = app.count("--seed") > 0;
      code = cmd_construct(cs, sub, run);
    } else if (sub == plot) code = cmd_plotdata(pa, run);
  } catch (const usage_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    code = usage;
  } catch (const charlab::domain_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    code = usage;
  } catch (const schema_error& e) {
    std::cerr << "schema error: " << e.what() << '\n';
    code = usage;
  } catch (const resource_error& e) {
    std::cerr << "resource limit: " << e.what() << '\n';
    code = resource;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    code = resource;
  }
  run.finish(code);
  return code;
}
