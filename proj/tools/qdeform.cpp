// qdeform command-line front end.
//
// Exit status: 0 all checks pass, 1 checks ran and some failed,
// 2 configuration or solver error before the checks.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <map>
#include <numbers>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "qdeform/checks.hpp"
#include "qdeform/deformed_algebra.hpp"
#include "qdeform/dynamics.hpp"
#include "qdeform/io.hpp"
#include "qdeform/position_rep.hpp"
#include "qdeform/report.hpp"
#include "qdeform/similarity.hpp"

namespace fs = std::filesystem;
using namespace qdeform;

namespace {

constexpr int kExitPass = 0;
constexpr int kExitFail = 1;
constexpr int kExitError = 2;

struct Context {
  fs::path out_dir;
  std::string format = "json";
  std::vector<std::string> thresholds;
  std::map<std::string, double> overrides;
  bool verbose = false;
  unsigned threads = 1;
  std::string subcommand;

  void log(const std::string& msg) const {
    if (verbose) std::cerr << "[" << subcommand << "] " << msg << '\n';
  }
};

class Stopwatch {
 public:
  Stopwatch(const Context& ctx, std::string stage)
      : ctx_(ctx), stage_(std::move(stage)), start_(std::chrono::steady_clock::now()) {
    ctx_.log(stage_ + " ...");
  }
  ~Stopwatch() {
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    ctx_.log(stage_ + " done in " + format_number(s) + " s");
    try {
      append_file(ctx_.out_dir / "timings.log", ctx_.subcommand + ' ' + stage_ + ' ' + format_number(s) + '\n');
    } catch (const Error&) {
    }
  }

 private:
  const Context& ctx_;
  std::string stage_;
  std::chrono::steady_clock::time_point start_;
};

std::string env_or(const char* name, const std::string& fallback) {
  const char* v = std::getenv(name);
  return v && *v ? std::string(v) : fallback;
}

void parse_overrides(Context& ctx) {
  for (const auto& item : ctx.thresholds) {
    const auto eq = item.rfind('=');
    require(eq != std::string::npos && eq > 0, ErrorKind::parameter, "threshold override must be TAG=VALUE");
    const std::string tag = item.substr(0, eq);
    const auto& tags = known_tags();
    require(std::find(tags.begin(), tags.end(), tag) != tags.end(), ErrorKind::parameter,
            "unknown equation tag '" + tag + "' in threshold override");
    try {
      ctx.overrides[tag] = std::stod(item.substr(eq + 1));
    } catch (const std::logic_error&) {
      throw Error(ErrorKind::parameter, "bad threshold value in '" + item + "'");
    }
  }
}

void apply_overrides(const Context& ctx, Report& report) {
  for (auto& e : report.entries) {
    const auto it = ctx.overrides.find(e.tag);
    if (it != ctx.overrides.end() && !e.informational) {
      e.threshold = it->second;
      report.nonstandard_thresholds = true;
    }
  }
}

int finish(const Context& ctx, Report& report) {
  apply_overrides(ctx, report);
  if (!ctx.overrides.empty()) {
    Json t = Json::object();
    for (const auto& [tag, v] : ctx.overrides) t[tag] = v;
    report.config["threshold_overrides"] = t;
  }
  if (ctx.format == "csv")
    write_file(ctx.out_dir / "report.csv", report_csv(report));
  else
    write_file(ctx.out_dir / "report.json", report_json(report).dump(2) + '\n');

  std::size_t failed = 0;
  for (const auto& e : report.entries) {
    if (e.informational) continue;
    if (!e.passed()) ++failed;
    if (ctx.verbose || !e.passed())
      std::cout << (e.passed() ? "pass " : "FAIL ") << e.tag << "  " << e.check << "  " << format_number(e.value)
                << ' ' << e.comparison() << ' ' << std::setprecision(6) << e.threshold << '\n';
  }
  std::cout << report.subcommand << ": " << report.entries.size() << " rows, " << failed << " failed; report in "
            << (ctx.out_dir / (ctx.format == "csv" ? "report.csv" : "report.json")).string() << '\n';
  return report.passed() ? kExitPass : kExitFail;
}

// operators ---------------------------------------------------------------

struct OperatorsArgs {
  std::size_t dim = 32;
  double u = 1.0;
  std::size_t interior = 0;
};

int cmd_operators(const Context& ctx, const OperatorsArgs& args) {
  detail::require_fock_dim(args.dim);
  Report report;
  report.subcommand = "operators";
  report.config = Json{{"dim", args.dim}, {"u", args.u}, {"interior", args.interior}, {"format", ctx.format}};
  {
    Stopwatch sw(ctx, "matrices");
    const std::size_t d = args.dim;
    write_file(ctx.out_dir / "a.json", matrix_json(annihilation(d)).dump() + '\n');
    write_file(ctx.out_dir / "a_dag.json", matrix_json(creation(d)).dump() + '\n');
    write_file(ctx.out_dir / "N.json", matrix_json(number(d)).dump() + '\n');
    write_file(ctx.out_dir / "Q.json", matrix_json(position(d)).dump() + '\n');
    write_file(ctx.out_dir / "P.json", matrix_json(momentum(d)).dump() + '\n');
    write_file(ctx.out_dir / "T.json", matrix_json(displacement(args.u, d).matrix).dump() + '\n');
  }
  {
    Stopwatch sw(ctx, "checks");
    report.entries = operator_checks(args.dim, args.u, args.interior);
  }
  return finish(ctx, report);
}

// verify ------------------------------------------------------------------

struct VerifyArgs {
  double q = 1.2;
  double u = 0.7;
  std::size_t dim = 48;
  std::size_t interior = 0;
  bool dump = false;
};

DeformParams make_params(double q, double u, std::size_t dim, std::size_t interior) {
  DeformParams p;
  p.q = q;
  p.u = u;
  p.dim = dim;
  p.interior = interior;
  return p;
}

int cmd_verify(const Context& ctx, const VerifyArgs& args) {
  const DeformParams params = make_params(args.q, args.u, args.dim, args.interior);
  params.validate();
  params.require_solvable();
  Report report;
  report.subcommand = "verify";
  report.config = Json{{"q", args.q},     {"u", args.u},      {"dim", args.dim},
                       {"interior", params.block()}, {"format", ctx.format}, {"working_digits", decimal_digits<Wide>()}};
  std::optional<ChainVerification<Wide>> chain;
  {
    Stopwatch sw(ctx, "chain");
    chain = verify_chain<Wide>(params);
  }
  report.entries = chain->entries;
  report.diagnostics["trivial_branch"] = chain->solution.trivial;
  if (chain->solution.trivial) report.diagnostics["note"] = "u=0, q=1: S = I";
  report.diagnostics["similarity"] = similarity_sidecar(chain->solution);
  if (args.dump) {
    Stopwatch sw(ctx, "dump");
    write_file(ctx.out_dir / "S.json", matrix_json(chain->solution.fock()).dump() + '\n');
    write_file(ctx.out_dir / "S.sidecar.json", similarity_sidecar(chain->solution).dump(2) + '\n');
    write_file(ctx.out_dir / "A.json", matrix_json(chain->pair.fock_a()).dump() + '\n');
    write_file(ctx.out_dir / "B.json", matrix_json(chain->pair.fock_b()).dump() + '\n');
  }
  return finish(ctx, report);
}

// sweep -------------------------------------------------------------------

struct SweepArgs {
  std::vector<double> qs{1.2};
  std::vector<double> us{0.7};
  std::vector<std::size_t> dims{48};
  std::size_t interior = 0;
};

struct SweepRow {
  double q = 0, u = 0;
  std::size_t dim = 0;
  std::string status = "ok";
  std::string message;
  std::vector<ReportEntry> entries;
};

SweepRow sweep_point(double q, double u, std::size_t dim, std::size_t interior) {
  SweepRow row{q, u, dim};
  try {
    const DeformParams p = make_params(q, u, dim, interior);
    row.entries = verify_chain<Wide>(p).entries;
    row.status = all_passed(row.entries) ? "pass" : "fail";
  } catch (const Error& e) {
    row.status = std::string(to_string(e.kind()));
    row.message = e.what();
  }
  return row;
}

int cmd_sweep(const Context& ctx, const SweepArgs& args) {
  Report report;
  report.subcommand = "sweep";
  report.config = Json{{"q", args.qs}, {"u", args.us}, {"dim", args.dims}, {"interior", args.interior},
                       {"format", ctx.format}};
  std::vector<SweepRow> rows;
  for (double q : args.qs)
    for (double u : args.us)
      for (std::size_t d : args.dims) rows.push_back(SweepRow{q, u, d});
  {
    Stopwatch sw(ctx, "grid");
    const unsigned workers = std::max(1u, std::min<unsigned>(ctx.threads, static_cast<unsigned>(rows.size())));
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t i = w; i < rows.size(); i += workers)
          rows[i] = sweep_point(rows[i].q, rows[i].u, rows[i].dim, args.interior);
      });
    }
    for (auto& t : pool) t.join();
  }

  std::vector<std::string> columns;
  for (const auto& row : rows)
    for (const auto& e : row.entries) {
      const std::string name = e.tag + ' ' + e.check;
      if (std::find(columns.begin(), columns.end(), name) == columns.end()) columns.push_back(name);
    }
  std::string csv = "q,u,dim,status";
  for (const auto& c : columns) csv += ',' + csv_field(c);
  csv += ",message\n";
  Json table = Json::array();
  for (const auto& row : rows) {
    Json j{{"q", row.q}, {"u", row.u}, {"dim", row.dim}, {"status", row.status}};
    csv += format_number(row.q) + ',' + format_number(row.u) + ',' + std::to_string(row.dim) + ',' + row.status;
    Json values = Json::object();
    for (const auto& c : columns) {
      std::string cell;
      for (const auto& e : row.entries)
        if (e.tag + ' ' + e.check == c) {
          cell = format_number(e.value);
          values[c] = number_json(e.value);
        }
      csv += ',' + cell;
    }
    csv += ',' + csv_field(row.message) + '\n';
    j["values"] = values;
    if (!row.message.empty()) j["message"] = row.message;
    table.push_back(j);

    const std::string where = "q=" + format_number(row.q) + " u=" + format_number(row.u) + " D=" + std::to_string(row.dim);
    if (row.entries.empty()) {
      ReportEntry e = gate("3.18", where + " solve (" + row.status + ")", row.dim, 1.0, 0.0);
      e.norm = "none";
      report.entries.push_back(e);
    }
    for (auto e : row.entries) {
      e.check = where + ": " + e.check;
      report.entries.push_back(e);
    }
  }
  report.diagnostics["rows"] = table;
  write_file(ctx.out_dir / "sweep.csv", csv);
  return finish(ctx, report);
}

// dynamics ----------------------------------------------------------------

struct DynamicsArgs {
  double q = 1.2;
  std::string path = "const:0.7";
  double t_end = 1.0;
  double h = 1e-3;
  std::size_t dim = 32;
  std::size_t interior = 0;
  std::size_t dump_every = 0;
};

int cmd_dynamics(const Context& ctx, const DynamicsArgs& args) {
  ParameterPath path = ParameterPath::parse(args.path);
  path.q = args.q;
  path.t_end = args.t_end;
  path.h = args.h;
  path.validate();
  detail::require_fock_dim(args.dim);
  require(args.dim >= 4, ErrorKind::parameter, "dynamics needs D >= 4");

  Report report;
  report.subcommand = "dynamics";
  TrajectoryOptions topts;
  topts.block = args.interior;
  topts.threads = ctx.threads;
  std::optional<Trajectory<Wide>> traj;
  {
    Stopwatch sw(ctx, "frames");
    traj = build_trajectory<Wide>(path, args.dim, topts);
  }
  report.config = Json{{"q", args.q}, {"path", path.text()}, {"t_end", args.t_end}, {"h", args.h},
                       {"dim", args.dim}, {"interior", traj->block}, {"format", ctx.format},
                       {"working_digits", decimal_digits<Wide>()}};

  std::optional<ConvergencePanel> panel;
  if (panel_possible(path)) {
    Stopwatch sw(ctx, "convergence");
    panel = convergence_panel(*traj);
  }
  {
    Stopwatch sw(ctx, "checks");
    report.entries = dynamics_checks(*traj, panel);
  }

  const auto residuals = modified_eom_residual(*traj);
  const auto drift = commutator_drift(*traj);
  std::string csv = "t,u,residual_A,residual_B,drift,condition_1norm,inverse_residual\n";
  for (std::size_t i = 0; i < traj->frames.size(); ++i) {
    const auto& f = traj->frames[i];
    csv += format_number(f.t) + ',' + format_number(f.u) + ',' + format_number(residuals[i].residual_a) + ',' +
           format_number(residuals[i].residual_b) + ',' + format_number(drift[i]) + ',' +
           format_number(f.condition_1norm) + ',' + format_number(f.inverse_residual) + '\n';
    if (args.dump_every > 0 && i % args.dump_every == 0) {
      char name[32];
      std::snprintf(name, sizeof name, "%06zu", i);
      write_file(ctx.out_dir / "frames" / (std::string("A_") + name + ".json"), matrix_json(f.a_op()).dump() + '\n');
      write_file(ctx.out_dir / "frames" / (std::string("B_") + name + ".json"), matrix_json(f.b_op()).dump() + '\n');
    }
  }
  write_file(ctx.out_dir / "trajectory.csv", csv);
  if (panel) {
    Json p;
    p["h"] = panel->steps;
    auto arr = [](const std::vector<double>& v) {
      Json a = Json::array();
      for (double x : v) a.push_back(number_json(x));
      return a;
    };
    p["residual_A"] = arr(panel->residual_a);
    p["residual_B"] = arr(panel->residual_b);
    p["reconstruction_A"] = arr(panel->green_a);
    p["reconstruction_B"] = arr(panel->green_b);
    report.diagnostics["convergence"] = p;
  } else {
    report.diagnostics["convergence"] = "skipped: needs t_end/h divisible by 4 and 4h <= t_end/50";
  }
  return finish(ctx, report);
}

// ode ---------------------------------------------------------------------

struct OdeArgs {
  double q = 3.0;
  double u = 0.0;
  std::string branch = "r0";
  double x_end = 4.0;
  std::string method = "dopri5";
  bool scan = false;
  std::size_t thetas = 12;
};

int cmd_ode(const Context& ctx, const OdeArgs& args) {
  const OdeProblem problem{args.q, args.u};
  problem.validate();
  require(args.branch == "r0" || args.branch == "r1", ErrorKind::parameter, "branch must be r0 or r1");
  require(args.method == "dopri5" || args.method == "bulirsch-stoer", ErrorKind::parameter,
          "method must be dopri5 or bulirsch-stoer");
  const Branch branch = args.branch == "r0" ? Branch::r0 : Branch::r1;
  const Stepper method = args.method == "dopri5" ? Stepper::dopri5 : Stepper::bulirsch_stoer;

  Report report;
  report.subcommand = "ode";
  report.config = Json{{"q", args.q},           {"u", args.u},   {"branch", args.branch}, {"x_end", args.x_end},
                       {"method", args.method}, {"scan", args.scan}, {"thetas", args.thetas}, {"format", ctx.format}};
  std::optional<OdeReport> rep;
  {
    Stopwatch sw(ctx, "integrate");
    rep = ode_checks(problem, branch, args.x_end, method);
  }
  report.entries = rep->entries;
  report.diagnostics["growth_class"] = to_string(rep->primary.growth);
  Json l2 = Json::array();
  for (const auto& [x, v] : rep->primary.l2_partial) l2.push_back(Json::array({x, number_json(v)}));
  report.diagnostics["l2_partial"] = l2;
  write_file(ctx.out_dir / ("psi_" + args.branch + ".txt"), ode_table(rep->primary));

  if (args.scan) {
    Stopwatch sw(ctx, "scan");
    std::vector<double> thetas;
    for (std::size_t i = 0; i < args.thetas; ++i)
      thetas.push_back(std::numbers::pi * static_cast<double>(i) / static_cast<double>(args.thetas));
    const ScanReport scan = square_integrability_scan(problem, thetas, args.x_end);
    Json rows = Json::array();
    auto row_json = [](const ScanRow& r) {
      return Json{{"theta", r.theta},
                  {"growth_class", to_string(r.growth)},
                  {"envelope_slope", number_json(r.envelope_slope)},
                  {"l2_final", number_json(r.l2_final)},
                  {"first_increment", number_json(r.first_increment)},
                  {"last_increment", number_json(r.last_increment)}};
    };
    for (const auto& r : scan.rows) rows.push_back(row_json(r));
    Json s{{"second_branch_seedable", scan.second_branch_seedable}, {"rows", rows}};
    if (scan.refined) s["refined"] = row_json(*scan.refined);
    if (!scan.note.empty()) s["note"] = scan.note;
    s["any_decaying"] = scan.any_decaying;
    report.diagnostics["scan"] = s;
    report.entries.push_back(info("3.25", "scan found a decaying mixture (1 yes, 0 no)", 0, scan.any_decaying ? 1 : 0));
  }
  return finish(ctx, report);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"qdeform: deformed oscillator algebra on truncated Fock spaces"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_config("--config", "", "key = value configuration file");

  Context ctx;
  std::string out_flag;
  bool verbose_flag = false;
  app.add_option("--out", out_flag, "output directory (default $QDEFORM_OUT or ./qdeform_out)");
  app.add_option("--format", ctx.format, "report format")->check(CLI::IsMember({"json", "csv"}));
  app.add_option("--threshold", ctx.thresholds, "override a gate threshold, TAG=VALUE (marks the report non-standard)");
  app.add_flag("-v,--verbose", verbose_flag, "progress on stderr (also $QDEFORM_VERBOSE)");

  OperatorsArgs op;
  auto* operators = app.add_subcommand("operators", "write a, a^dagger, N, Q, P, T(u) and check their identities");
  operators->add_option("--dim", op.dim, "truncation dimension D");
  operators->add_option("--u", op.u, "displacement parameter");
  operators->add_option("--interior", op.interior, "interior block K (default D/2)");

  VerifyArgs va;
  auto* verify = app.add_subcommand("verify", "solve S, build (A,B) and tabulate the commutator chain");
  verify->add_option("--q", va.q, "deformation parameter");
  verify->add_option("--u", va.u, "displacement parameter");
  verify->add_option("--dim", va.dim, "truncation dimension D");
  verify->add_option("--interior", va.interior, "interior block K (default D/4)");
  verify->add_flag("--dump", va.dump, "write S, A, B and the S sidecar");

  SweepArgs sa;
  auto* sweep = app.add_subcommand("sweep", "verify over a (q, u, D) grid");
  sweep->add_option("--q", sa.qs, "q values")->delimiter(',');
  sweep->add_option("--u", sa.us, "u values")->delimiter(',');
  sweep->add_option("--dim", sa.dims, "dimensions")->delimiter(',');
  sweep->add_option("--interior", sa.interior, "interior block K (default D/4)");

  DynamicsArgs da;
  auto* dynamics = app.add_subcommand("dynamics", "time-dependent S(t), T(t): modified equations of motion");
  dynamics->set_help_flag("--help", "Print this help message and exit");  // frees the name h for the step size
  dynamics->add_option("--q", da.q, "deformation parameter");
  dynamics->add_option("--path", da.path, "const:u0 | ramp:u0,rate | sine:u0,amplitude,omega");
  dynamics->add_option("--t-end", da.t_end, "final time");
  dynamics->add_option("--h", da.h, "sample step");
  dynamics->add_option("--dim", da.dim, "truncation dimension D");
  dynamics->add_option("--interior", da.interior, "interior block K (default D/4)");
  dynamics->add_option("--dump-every", da.dump_every, "write A(t), B(t) every N frames (0: never)");

  OdeArgs oa;
  auto* ode = app.add_subcommand("ode", "coordinate-representation ODE: integrate, classify, scan");
  ode->add_option("--q", oa.q, "deformation parameter (q != 1)");
  ode->add_option("--u", oa.u, "displacement parameter");
  ode->add_option("--branch", oa.branch, "Frobenius branch r0 | r1");
  ode->add_option("--x-end", oa.x_end, "integration end point");
  ode->add_option("--method", oa.method, "dopri5 | bulirsch-stoer");
  ode->add_flag("--scan", oa.scan, "scan mixtures of the two branches");
  ode->add_option("--thetas", oa.thetas, "number of mixing angles in [0, pi)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitError;
  }

  ctx.out_dir = out_flag.empty() ? fs::path(env_or("QDEFORM_OUT", "qdeform_out")) : fs::path(out_flag);
  const std::string verbose_env = env_or("QDEFORM_VERBOSE", "0");
  ctx.verbose = verbose_flag || (verbose_env != "0" && verbose_env != "");
  try {
    ctx.threads = static_cast<unsigned>(std::max(1, std::stoi(env_or("QDEFORM_THREADS", "1"))));
  } catch (const std::logic_error&) {
    ctx.threads = 1;
  }

  try {
    parse_overrides(ctx);
    if (*operators) {
      ctx.subcommand = "operators";
      return cmd_operators(ctx, op);
    }
    if (*verify) {
      ctx.subcommand = "verify";
      return cmd_verify(ctx, va);
    }
    if (*sweep) {
      ctx.subcommand = "sweep";
      return cmd_sweep(ctx, sa);
    }
    if (*dynamics) {
      ctx.subcommand = "dynamics";
      return cmd_dynamics(ctx, da);
    }
    ctx.subcommand = "ode";
    return cmd_ode(ctx, oa);
  } catch (const Error& e) {
    std::cerr << "error [" << to_string(e.kind()) << "]: " << e.what() << '\n';
    return kExitError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitError;
  }
}
