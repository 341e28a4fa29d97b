// Command-line surface for the variational boosting library: `run` executes
// the boosting pipeline, `rank` runs the covariance rank sweep, and `compare`
// tabulates fitted moments against an MCMC or quadrature oracle.

#include "vboost/compare.hpp"
#include "vboost/driver.hpp"
#include "vboost/hier_models.hpp"
#include "vboost/mixture_io.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void check_keys(const json& obj, const std::vector<std::string>& allowed,
                const std::string& context) {
  for (const auto& [key, value] : obj.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      throw vboost::ConfigError("config: unknown key '" + key + "' in " + context);
  }
}

template <typename T>
T get_or(const json& obj, const std::string& key, T fallback) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw vboost::ConfigError("config: bad value for '" + key + "': " + e.what());
  }
}

struct TargetSpec {
  std::string name;
  // gauss / gmm
  std::vector<double> weights;
  std::vector<vboost::Vec> means;
  std::vector<vboost::Mat> covs;
  // binomial
  std::string data_csv;
  // poisson (synthetic)
  int e_count = 3;
  int p_count = 31;
  std::uint64_t gen_seed = 0;
  vboost::PoissonGenParams gen;
};

vboost::Vec parse_vec(const json& j, const std::string& context) {
  if (!j.is_array()) throw vboost::ConfigError("config: " + context + " must be an array");
  vboost::Vec v(j.size());
  Eigen::Index i = 0;
  for (const auto& x : j) v[i++] = x.get<double>();
  return v;
}

vboost::Mat parse_mat(const json& j, const std::string& context) {
  if (!j.is_array() || j.empty())
    throw vboost::ConfigError("config: " + context + " must be a non-empty 2d array");
  const Eigen::Index rows = static_cast<Eigen::Index>(j.size());
  const Eigen::Index cols = static_cast<Eigen::Index>(j.front().size());
  vboost::Mat m(rows, cols);
  Eigen::Index r = 0;
  for (const auto& row : j) {
    if (static_cast<Eigen::Index>(row.size()) != cols)
      throw vboost::ConfigError("config: ragged rows in " + context);
    Eigen::Index c = 0;
    for (const auto& x : row) m(r, c++) = x.get<double>();
    ++r;
  }
  return m;
}

TargetSpec parse_target(const json& j) {
  if (!j.is_object() || !j.contains("name"))
    throw vboost::ConfigError("config: 'target' must be an object with a 'name'");
  TargetSpec spec;
  spec.name = j.at("name").get<std::string>();
  if (spec.name == "gauss") {
    check_keys(j, {"name", "mean", "cov"}, "target");
    spec.means.push_back(parse_vec(j.at("mean"), "target.mean"));
    spec.covs.push_back(parse_mat(j.at("cov"), "target.cov"));
    spec.weights.push_back(1.0);
  } else if (spec.name == "gmm") {
    check_keys(j, {"name", "weights", "means", "covs"}, "target");
    spec.weights = j.at("weights").get<std::vector<double>>();
    for (const auto& m : j.at("means")) spec.means.push_back(parse_vec(m, "target.means"));
    for (const auto& c : j.at("covs")) spec.covs.push_back(parse_mat(c, "target.covs"));
  } else if (spec.name == "binomial") {
    check_keys(j, {"name", "data_csv"}, "target");
    spec.data_csv = j.at("data_csv").get<std::string>();
  } else if (spec.name == "poisson") {
    check_keys(j,
               {"name", "ethnicity_groups", "precincts", "gen_seed", "mu", "sigma_alpha",
                "sigma_beta", "exposure_min", "exposure_max"},
               "target");
    spec.e_count = get_or<int>(j, "ethnicity_groups", 3);
    spec.p_count = get_or<int>(j, "precincts", 31);
    spec.gen_seed = get_or<std::uint64_t>(j, "gen_seed", 0);
    spec.gen.mu = get_or<double>(j, "mu", spec.gen.mu);
    spec.gen.sigma_alpha = get_or<double>(j, "sigma_alpha", spec.gen.sigma_alpha);
    spec.gen.sigma_beta = get_or<double>(j, "sigma_beta", spec.gen.sigma_beta);
    spec.gen.exposure_min = get_or<long>(j, "exposure_min", spec.gen.exposure_min);
    spec.gen.exposure_max = get_or<long>(j, "exposure_max", spec.gen.exposure_max);
  } else {
    throw vboost::ConfigError("config: unknown target '" + spec.name +
                              "' (expected gauss, gmm, binomial, or poisson)");
  }
  return spec;
}

vboost::TargetModel build_target(const TargetSpec& spec) {
  try {
    if (spec.name == "gauss") return vboost::gauss_target(spec.means[0], spec.covs[0]);
    if (spec.name == "gmm") return vboost::gmm_target(spec.weights, spec.means, spec.covs);
    if (spec.name == "binomial")
      return vboost::hierarchical_binomial(vboost::load_binomial_csv(spec.data_csv));
    return vboost::multilevel_poisson(
        vboost::gen_poisson_data(spec.gen_seed, spec.e_count, spec.p_count, spec.gen));
  } catch (const vboost::ConfigError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw vboost::ConfigError(std::string("config: target invalid: ") + e.what());
  }
}

struct CompareSpec {
  long mh_steps = 200000;
  long burn_in = 40000;
  double proposal_scale = 0.5;
  std::uint64_t seed = 1;
};

struct RunSpec {
  json target_json;
  TargetSpec target;
  vboost::VBoostConfig vb;
  CompareSpec cmp;
  std::string output_dir = "out";
};

RunSpec parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw vboost::ConfigError("cannot open config file: " + path);
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw vboost::ConfigError("config parse error in " + path + ": " + e.what());
  }
  check_keys(doc, {"target", "vboost", "compare", "output_dir"}, "top level");
  if (!doc.contains("target")) throw vboost::ConfigError("config: missing 'target'");

  RunSpec spec;
  spec.target_json = doc.at("target");
  spec.target = parse_target(spec.target_json);
  spec.output_dir = get_or<std::string>(doc, "output_dir", "out");

  const json vb = doc.contains("vboost") ? doc.at("vboost") : json::object();
  check_keys(vb,
             {"max_components", "rank", "rank_sweep", "tau", "max_rank", "steps_first",
              "steps_stage", "n_new", "n_old", "step_size", "record_every", "init",
              "init_samples", "seed", "eval_samples"},
             "vboost");
  auto& cfg = spec.vb;
  cfg.max_components = get_or<int>(vb, "max_components", cfg.max_components);
  cfg.rank = get_or<int>(vb, "rank", cfg.rank);
  cfg.rank_sweep = get_or<bool>(vb, "rank_sweep", cfg.rank_sweep);
  cfg.tau = get_or<double>(vb, "tau", cfg.tau);
  cfg.max_rank = get_or<int>(vb, "max_rank", cfg.max_rank);
  cfg.steps_first = get_or<int>(vb, "steps_first", cfg.steps_first);
  cfg.steps_stage = get_or<int>(vb, "steps_stage", cfg.steps_stage);
  cfg.n_new = get_or<int>(vb, "n_new", cfg.n_new);
  cfg.n_old = get_or<int>(vb, "n_old", cfg.n_old);
  cfg.step_size = get_or<double>(vb, "step_size", cfg.step_size);
  cfg.record_every = get_or<int>(vb, "record_every", cfg.record_every);
  cfg.init_samples = get_or<int>(vb, "init_samples", cfg.init_samples);
  cfg.seed = get_or<std::uint64_t>(vb, "seed", cfg.seed);
  cfg.eval_samples = get_or<int>(vb, "eval_samples", cfg.eval_samples);
  const std::string init = get_or<std::string>(vb, "init", "alg1");
  if (init == "alg1") cfg.init_method = vboost::InitMethod::alg1;
  else if (init == "max-weight") cfg.init_method = vboost::InitMethod::max_weight;
  else throw vboost::ConfigError("config: init must be 'alg1' or 'max-weight'");

  const json cmp = doc.contains("compare") ? doc.at("compare") : json::object();
  check_keys(cmp, {"mh_steps", "burn_in", "proposal_scale", "seed"}, "compare");
  spec.cmp.mh_steps = get_or<long>(cmp, "mh_steps", spec.cmp.mh_steps);
  spec.cmp.burn_in = get_or<long>(cmp, "burn_in", spec.cmp.burn_in);
  spec.cmp.proposal_scale = get_or<double>(cmp, "proposal_scale", spec.cmp.proposal_scale);
  spec.cmp.seed = get_or<std::uint64_t>(cmp, "seed", spec.cmp.seed);
  if (spec.cmp.mh_steps <= spec.cmp.burn_in || spec.cmp.proposal_scale <= 0.0)
    throw vboost::ConfigError("config: compare needs mh_steps > burn_in and a positive scale");

  vboost::validate(spec.vb);
  return spec;
}

json resolved_config(const RunSpec& spec) {
  json vb;
  vb["max_components"] = spec.vb.max_components;
  vb["rank"] = spec.vb.rank;
  vb["rank_sweep"] = spec.vb.rank_sweep;
  vb["tau"] = spec.vb.tau;
  vb["max_rank"] = spec.vb.max_rank;
  vb["steps_first"] = spec.vb.steps_first;
  vb["steps_stage"] = spec.vb.steps_stage;
  vb["n_new"] = spec.vb.n_new;
  vb["n_old"] = spec.vb.n_old;
  vb["step_size"] = spec.vb.step_size;
  vb["record_every"] = spec.vb.record_every;
  vb["init"] = spec.vb.init_method == vboost::InitMethod::alg1 ? "alg1" : "max-weight";
  vb["init_samples"] = spec.vb.init_samples;
  vb["seed"] = spec.vb.seed;
  vb["eval_samples"] = spec.vb.eval_samples;
  json cmp;
  cmp["mh_steps"] = spec.cmp.mh_steps;
  cmp["burn_in"] = spec.cmp.burn_in;
  cmp["proposal_scale"] = spec.cmp.proposal_scale;
  cmp["seed"] = spec.cmp.seed;
  json doc;
  doc["target"] = spec.target_json;
  doc["vboost"] = vb;
  doc["compare"] = cmp;
  doc["output_dir"] = spec.output_dir;
  return doc;
}

std::string fmt_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

void write_file(const fs::path& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << contents;
}

void write_run_outputs(const RunSpec& spec, const vboost::VBoostResult& result,
                       const fs::path& out_dir) {
  fs::create_directories(out_dir);

  std::string trace = "stage,step,elbo_estimate,grad_norm\n";
  for (std::size_t s = 0; s < result.traces.size(); ++s)
    for (const auto& rec : result.traces[s])
      trace += std::to_string(s + 1) + "," + std::to_string(rec.step) + "," +
               fmt_double(rec.objective) + "," + fmt_double(rec.grad_norm) + "\n";
  write_file(out_dir / "trace.csv", trace);

  std::string stages = "stage,n_components,rank,eval_elbo,eval_se\n";
  for (const auto& st : result.stages)
    stages += std::to_string(st.stage) + "," + std::to_string(st.n_components) + "," +
              std::to_string(st.rank) + "," + fmt_double(st.eval.value) + "," +
              fmt_double(st.eval.std_error) + "\n";
  write_file(out_dir / "stages.csv", stages);

  vboost::save_mixture(result.mixture, (out_dir / "mixture.json").string());
  write_file(out_dir / "config.resolved.json", resolved_config(spec).dump(2) + "\n");
}

std::string rank_sweep_csv(const std::vector<vboost::RankRecord>& records) {
  std::string out = "rank,mean_marginal_variance,pct_change\n";
  for (const auto& rec : records) {
    out += std::to_string(rec.rank) + "," + fmt_double(rec.mean_marginal_variance) + ",";
    if (std::isfinite(rec.pct_change)) out += fmt_double(rec.pct_change);
    out += "\n";
  }
  return out;
}

int cmd_run(const RunSpec& spec, const fs::path& out_dir) {
  const vboost::TargetModel target = build_target(spec.target);
  const vboost::VBoostResult result = vboost::run(target, spec.vb);
  write_run_outputs(spec, result, out_dir);
  if (!result.rank_selection.records.empty())
    write_file(out_dir / "rank_sweep.csv", rank_sweep_csv(result.rank_selection.records));
  std::cout << "run complete: " << result.stages.size() << " stage(s), rank "
            << result.rank << ", final eval ELBO "
            << fmt_double(result.stages.back().eval.value) << " nats\n";
  return 0;
}

int cmd_rank(const RunSpec& spec, const fs::path& out_dir) {
  const vboost::TargetModel target = build_target(spec.target);
  vboost::VBoostConfig cfg = spec.vb;
  cfg.max_rank = std::min<int>(cfg.max_rank, static_cast<int>(target.dim));
  const vboost::RankSelection sel = vboost::select_rank(target, cfg);
  fs::create_directories(out_dir);
  write_file(out_dir / "rank_sweep.csv", rank_sweep_csv(sel.records));
  std::cout << "rank sweep complete: selected rank " << sel.selected_rank
            << (sel.hit_max_rank ? " (warning: stopped at max_rank without converging)" : "")
            << "\n";
  return 0;
}

int cmd_compare(const RunSpec& spec, const std::string& mixture_path,
                const fs::path& out_dir) {
  const vboost::TargetModel target = build_target(spec.target);
  const vboost::MixtureApprox mix = vboost::load_mixture(mixture_path);
  if (mix.dim() != target.dim)
    throw vboost::ConfigError("mixture dimension " + std::to_string(mix.dim()) +
                              " does not match target dimension " +
                              std::to_string(target.dim));

  std::vector<vboost::MomentRow> rows;
  if (target.dim <= 2) {
    // deterministic quadrature oracle on a grid centered on the mixture
    const vboost::Vec mean = vboost::mix_mean(mix);
    const vboost::Vec sd = vboost::mix_cov_diag(mix).cwiseSqrt();
    if (target.dim == 1) {
      rows = vboost::moment_table(
          mix, vboost::quadrature_moments(
                   target, vboost::grid_1d(mean[0] - 12 * sd[0], mean[0] + 12 * sd[0], 2001)));
    } else {
      rows = vboost::moment_table(
          mix, vboost::quadrature_moments(
                   target, vboost::grid_2d(mean[0] - 12 * sd[0], mean[0] + 12 * sd[0],
                                           mean[1] - 12 * sd[1], mean[1] + 12 * sd[1], 501)));
    }
  } else {
    vboost::RngStream rng(spec.cmp.seed);
    const vboost::MhChain chain = vboost::rwm_sample(
        target, spec.cmp.mh_steps, spec.cmp.burn_in, spec.cmp.proposal_scale, rng);
    rows = vboost::moment_table(mix, chain);
  }

  std::string csv = "statistic,vb_value,oracle_value,oracle_se\n";
  for (const auto& row : rows)
    csv += row.id + "," + fmt_double(row.vb_value) + "," + fmt_double(row.oracle_value) +
           "," + fmt_double(row.oracle_se) + "\n";
  fs::create_directories(out_dir);
  write_file(out_dir / "compare_moments.csv", csv);
  std::cout << "compare complete: " << rows.size() << " statistics written\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Variational boosting: mixture-of-Gaussians posterior approximation"};
  app.require_subcommand(1);

  std::string config_path, out_override, mixture_path;
  std::optional<std::uint64_t> seed_override;
  std::optional<int> eval_samples_override;

  auto add_common = [&](CLI::App* sub, bool needs_mixture) {
    sub->add_option("--config", config_path, "run configuration (json)")->required();
    sub->add_option("--out", out_override, "output directory (overrides config)");
    sub->add_option("--seed", seed_override, "seed override");
    sub->add_option("--eval-samples", eval_samples_override,
                    "evaluation-grade sample count override");
    if (needs_mixture)
      sub->add_option("--mixture", mixture_path, "fitted mixture (json)")->required();
  };
  CLI::App* run_cmd = app.add_subcommand("run", "fit a mixture by variational boosting");
  CLI::App* rank_cmd = app.add_subcommand("rank", "covariance rank sweep only");
  CLI::App* compare_cmd =
      app.add_subcommand("compare", "compare fitted moments against an oracle");
  add_common(run_cmd, false);
  add_common(rank_cmd, false);
  add_common(compare_cmd, true);

  CLI11_PARSE(app, argc, argv);

  try {
    RunSpec spec = parse_config(config_path);
    if (seed_override) {
      spec.vb.seed = *seed_override;
      spec.cmp.seed = *seed_override;
    }
    if (eval_samples_override) spec.vb.eval_samples = *eval_samples_override;
    const fs::path out_dir = out_override.empty() ? fs::path(spec.output_dir)
                                                  : fs::path(out_override);
    spec.output_dir = out_dir.string();
    if (app.got_subcommand(run_cmd)) return cmd_run(spec, out_dir);
    if (app.got_subcommand(rank_cmd)) return cmd_rank(spec, out_dir);
    return cmd_compare(spec, mixture_path, out_dir);
  } catch (const vboost::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
