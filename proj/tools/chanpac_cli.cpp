// chanpac command-line front end: bound / oracle / train / eval / table /
// gradcheck subcommands wiring the header library into reproducible runs.

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "chanpac/chanpac.hpp"
#include "json.hpp"

using nlohmann::json;
using namespace chanpac;

namespace {

// ---------------------------------------------------------------------------
// Option bundles. Each bundle registers flags on a subcommand and can also be
// filled from a JSON config object; explicitly passed flags win over the file.

std::string resolve_data_path(const std::string& path) {
  namespace fs = std::filesystem;
  if (path.empty() || fs::path(path).is_absolute() || fs::exists(path))
    return path;
  if (const char* dir = std::getenv("CHANNEL_PAC_DATA_DIR")) {
    const fs::path joined = fs::path(dir) / path;
    if (fs::exists(joined)) return joined.string();
  }
  return path;
}

struct DataOpts {
  std::string source = "blobs";  // blobs | idx
  std::size_t blobs_n = 200;
  std::size_t blobs_dim = 4;
  int blobs_classes = 2;
  double blobs_spread = 0.5;
  std::uint64_t data_seed = 1;
  std::string images, labels;
  std::size_t take = 0;  // 0 = all

  void add(CLI::App& app, const std::string& prefix = "") {
    const std::string p = prefix.empty() ? "--" : "--" + prefix + "-";
    app.add_option(p + "data", source, "dataset source: blobs or idx")
        ->check(CLI::IsMember({"blobs", "idx"}));
    app.add_option(p + "blobs-n", blobs_n, "blob sample count");
    app.add_option(p + "blobs-dim", blobs_dim, "blob feature dimension");
    app.add_option(p + "blobs-classes", blobs_classes, "blob class count");
    app.add_option(p + "blobs-spread", blobs_spread, "blob within-class stddev");
    app.add_option(p + "data-seed", data_seed, "dataset seed");
    app.add_option(p + "images", images, "IDX image file");
    app.add_option(p + "labels", labels, "IDX label file");
    app.add_option(p + "take", take, "keep only the first N samples (0 = all)");
  }

  Dataset load() const {
    Dataset ds;
    if (source == "idx") {
      if (images.empty() || labels.empty())
        throw std::invalid_argument("data: idx source needs --images/--labels");
      ds = load_idx(resolve_data_path(images), resolve_data_path(labels));
    } else {
      ds = make_blobs(blobs_n, blobs_dim, blobs_classes, blobs_spread, data_seed);
    }
    if (take > 0) ds = take_first(ds, std::min(take, ds.n));
    return ds;
  }
};

struct NetOpts {
  std::vector<std::size_t> dims = {4, 8, 2};
  std::size_t split_index = 2;
  std::string activation = "relu";

  void add(CLI::App& app) {
    app.add_option("--layers", dims, "layer widths, input first (e.g. 784 256 32 10)")
        ->delimiter(',');
    app.add_option("--split-index", split_index,
                   "channel position l0 (channel feeds learnable layer l0)");
    app.add_option("--activation", activation, "hidden activation")
        ->check(CLI::IsMember({"relu", "tanh"}));
  }

  NetworkSpec build() const {
    if (dims.size() < 2)
      throw std::invalid_argument("network: need at least input and output dims");
    const Activation hidden =
        activation == "tanh" ? Activation::Tanh : Activation::Relu;
    NetworkSpec spec;
    for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
      const bool last = i + 2 == dims.size();
      spec.layers.push_back({dims[i], dims[i + 1],
                             last ? Activation::Identity : hidden});
    }
    spec.split_index = split_index;
    spec.classes = static_cast<int>(dims.back());
    spec.validate();
    return spec;
  }
};

struct ChannelOpts {
  std::string kind = "identity";
  double po = 0.1;
  double gamma = 1.0;
  std::optional<double> snr_db;

  void add(CLI::App& app) {
    app.add_option("--channel", kind, "channel kind")
        ->check(CLI::IsMember({"identity", "bec", "rayleigh"}));
    app.add_option("--po", po, "BEC per-symbol outage probability");
    app.add_option("--gamma", gamma, "Rayleigh SNR (linear)");
    double db = 0.0;
    app.add_option_function<double>(
           "--snr-db", [this](double v) { snr_db = v; },
           "Rayleigh SNR in dB (overrides --gamma)")
        ->expected(1);
    (void)db;
  }

  ChannelSpec build(std::size_t d) const {
    ChannelSpec ch;
    ch.d = d;
    if (kind == "bec") {
      ch.kind = ChannelKind::Bec;
      ch.p_o = po;
    } else if (kind == "rayleigh") {
      ch.kind = ChannelKind::RayleighZf;
      ch.gamma = snr_db ? std::pow(10.0, *snr_db / 10.0) : gamma;
    }
    ch.validate();
    return ch;
  }
};

// Applies JSON config values for keys the user did not pass as flags.
void apply_config(CLI::App& app, const json& cfg) {
  for (auto it = cfg.begin(); it != cfg.end(); ++it) {
    if (it.key() == "version") continue;
    CLI::Option* opt = app.get_option_no_throw("--" + it.key());
    if (opt == nullptr)
      throw std::invalid_argument("config: unknown key '" + it.key() + "'");
    if (opt->count() > 0) continue;  // explicit flag wins
    std::vector<std::string> vals;
    if (it.value().is_array())
      for (const auto& v : it.value())
        vals.push_back(v.is_string() ? v.get<std::string>() : v.dump());
    else if (it.value().is_string())
      vals.push_back(it.value().get<std::string>());
    else
      vals.push_back(it.value().dump());
    opt->add_result(vals.empty() ? "" : vals.front());
    for (std::size_t i = 1; i < vals.size(); ++i) opt->add_result(vals[i]);
    opt->run_callback();
  }
}

json load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open " + path);
  json cfg = json::parse(in);
  if (!cfg.contains("version"))
    throw std::invalid_argument("config: missing 'version' field");
  return cfg;
}

json report_to_json(const BoundReport& r) {
  return json{{"empirical_risk", r.empirical_risk},
              {"concentration_term", r.concentration_term},
              {"confidence_term", r.confidence_term},
              {"kl_term", r.kl_term},
              {"penalty_term", r.penalty_term},
              {"extra_log_term", r.extra_log_term},
              {"total", r.total},
              {"surrogate", r.surrogate}};
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("output: cannot write " + path);
  out << text;
}

// ---------------------------------------------------------------------------
// bound

int run_bound(const ChannelOpts& chan, std::size_t d, double k, std::int64_t n,
              double K, double kl, double eps, double sigma, double risk) {
  BoundConfig cfg;
  cfg.n = n;
  cfg.k = k > 0.0 ? k : std::sqrt(static_cast<double>(n));
  cfg.epsilon = eps;
  cfg.sigma = sigma;
  cfg.lipschitz = K;
  cfg.channel = chan.build(d);
  const BoundReport r = compose_bound(cfg, risk, kl, static_cast<int>(d));
  json out = report_to_json(r);
  out["k"] = cfg.k;
  out["channel"] = to_string(cfg.channel.kind);
  std::cout << out.dump(2) << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// oracle

int run_oracle(const std::string& target, std::size_t d, double po,
               double gamma, std::int64_t samples, std::uint64_t seed) {
  json out{{"target", target}};
  Rng rng(seed, "channel");
  if (target == "omega-bec") {
    const double closed = omega_bec(static_cast<int>(d), po);
    ChannelSpec ch{ChannelKind::Bec, d, po, 1.0};
    const auto mc = mc_omega(ch, penalty_metric(ch), samples, rng);
    out["closed_form"] = closed;
    out["mc_estimate"] = mc.estimate;
    out["mc_stderr"] = mc.stderr_est;
    out["max_deviation"] = std::abs(mc.estimate - closed);
  } else if (target == "omega-rayleigh") {
    const double closed = omega_rayleigh_scalar(gamma);
    const double quad = quad_omega_rayleigh(gamma);
    ChannelSpec ch{ChannelKind::RayleighZf, 2, 0.0, gamma};
    const auto mc = mc_omega(ch, penalty_metric(ch), samples, rng);
    out["closed_form"] = closed;
    out["quadrature"] = quad;
    out["mc_estimate"] = mc.estimate;
    out["mc_stderr"] = mc.stderr_est;
    out["max_deviation"] = std::max(std::abs(quad - closed),
                                    std::abs(mc.estimate - closed));
  } else if (target == "entropy") {
    const double closed = std::log(std::numbers::pi * std::exp(2.0) / gamma);
    const double quad = quad_entropy_T(gamma);
    out["closed_form"] = closed;
    out["quadrature"] = quad;
    out["max_deviation"] = std::abs(quad - closed);
  } else {
    throw std::invalid_argument("oracle: unknown target " + target);
  }
  std::cout << out.dump(2) << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// train

TrainConfig make_train_config(const std::string& mode, double eta1, double k,
                              double lr, int epochs, std::size_t batch_size,
                              double sigma_p, std::uint64_t seed,
                              const std::string& khat_grad, int khat_refresh,
                              bool khat_full, std::size_t n,
                              const std::string& khat_scope = "all_weights",
                              double clip_norm = 0.0) {
  TrainConfig cfg;
  cfg.mode = mode == "erm" ? TrainMode::Erm : TrainMode::ChannelAware;
  cfg.eta1 = eta1;
  cfg.k = k > 0.0 ? k : std::sqrt(static_cast<double>(n));
  cfg.lr = lr;
  cfg.epochs = epochs;
  cfg.batch_size = batch_size;
  cfg.sigma_p = sigma_p;
  cfg.seed = seed;
  cfg.khat_grad = khat_grad == "stop_gradient" ? KhatGradMode::StopGradient
                                               : KhatGradMode::DoubleBackpropFd;
  cfg.khat_scope = khat_scope == "split_feature" ? KhatScope::SplitFeature
                                                 : KhatScope::AllWeights;
  cfg.khat_refresh = khat_refresh;
  cfg.khat_full_dataset = khat_full;
  cfg.clip_norm = clip_norm;
  return cfg;
}

int run_train(const DataOpts& data, const NetOpts& net, const ChannelOpts& chan,
              const TrainConfig& partial_cfg, const std::string& init_path,
              const std::string& out_path, const std::string& stats_path) {
  const Dataset ds = data.load();
  const NetworkSpec spec = net.build();
  const ChannelSpec channel = chan.build(spec.split_dim());
  TrainConfig cfg = partial_cfg;
  if (cfg.k <= 0.0) cfg.k = std::sqrt(static_cast<double>(ds.n));
  if (!init_path.empty()) {
    const Checkpoint init = load_checkpoint(init_path);
    if (init.spec.param_count() != spec.param_count())
      throw std::invalid_argument("train: --init-checkpoint shape mismatch");
    cfg.mu_init = init.is_posterior ? init.posterior.mu : init.params;
  }
  const TrainResult res = train(spec, ds, channel, cfg);

  if (!out_path.empty()) {
    Checkpoint ck;
    ck.spec = spec;
    ck.is_posterior = cfg.mode == TrainMode::ChannelAware;
    ck.params = res.params;
    ck.posterior = res.posterior;
    save_checkpoint(ck, out_path);
  }
  if (!stats_path.empty()) write_train_stats_csv(res.stats, stats_path);

  json out{{"mode", cfg.mode == TrainMode::Erm ? "erm" : "channel_aware"},
           {"n", ds.n},
           {"epochs", cfg.epochs},
           {"final_objective", res.stats.objective.back()},
           {"final_empirical_risk", res.stats.empirical_risk.back()},
           {"final_kl", res.stats.kl.back()},
           {"final_khat", res.stats.khat.back()},
           {"omega", res.stats.omega.back()}};
  std::cout << out.dump(2) << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// eval

int run_eval(const std::string& checkpoint_path, const DataOpts& test_data,
             const DataOpts& train_data, bool have_train,
             const ChannelOpts& chan, int channel_draws, int weight_draws,
             std::uint64_t seed, const std::string& out_path) {
  const Checkpoint ck = load_checkpoint(checkpoint_path);
  const Dataset test_set = test_data.load();
  const ChannelSpec channel = chan.build(ck.spec.split_dim());
  const ModelRef model = ck.is_posterior ? ModelRef::of(ck.posterior)
                                         : ModelRef::of(ck.params);
  json out{{"checkpoint", checkpoint_path},
           {"channel", to_string(channel.kind)},
           {"posterior", ck.is_posterior}};
  if (have_train) {
    const Dataset train_set = train_data.load();
    const auto gap = estimate_gap(model, ck.spec, train_set, test_set, channel,
                                  channel_draws, weight_draws, Rng(seed, "channel"));
    out["population_risk"] = gap.population_risk.mean_01_loss;
    out["population_stderr"] = gap.population_risk.stderr_est;
    out["empirical_risk"] = gap.empirical_risk;
    out["delta"] = gap.delta;
  } else {
    const auto est = estimate_population_risk(model, ck.spec, test_set, channel,
                                              channel_draws, weight_draws,
                                              Rng(seed, "channel"));
    out["population_risk"] = est.mean_01_loss;
    out["population_stderr"] = est.stderr_est;
    out["n_channel_draws"] = est.n_channel_draws;
    out["n_weight_draws"] = est.n_weight_draws;
  }
  const std::string text = out.dump(2) + "\n";
  if (!out_path.empty()) write_text(out_path, text);
  std::cout << text;
  return 0;
}

// ---------------------------------------------------------------------------
// table

struct Scenario {
  std::string name;
  ChannelSpec channel;
};

std::vector<Scenario> default_scenarios(std::size_t d) {
  return {{"bec_po_0.1", {ChannelKind::Bec, d, 0.1, 1.0}},
          {"bec_po_0.8", {ChannelKind::Bec, d, 0.8, 1.0}},
          {"rayleigh_0dB", {ChannelKind::RayleighZf, d, 0.0, 1.0}},
          {"rayleigh_-5dB",
           {ChannelKind::RayleighZf, d, 0.0, std::pow(10.0, -0.5)}}};
}

int run_table(const DataOpts& train_data, const DataOpts& test_data,
              bool have_test, const NetOpts& net,
              const std::vector<std::uint64_t>& seeds, const TrainConfig& base,
              int channel_draws, int weight_draws, double eps, double sigma,
              const std::string& csv_path, const std::string& json_path) {
  const Dataset train_set = train_data.load();
  Dataset test_holder;
  const Dataset* test_set = &train_set;
  if (have_test) {
    test_holder = test_data.load();
    test_set = &test_holder;
  }
  const NetworkSpec spec = net.build();
  const std::size_t d = spec.split_dim();
  const auto scenarios = default_scenarios(d);

  // ERM baseline is channel-free, so one run per seed serves all scenarios.
  std::vector<TrainResult> erm_runs;
  for (std::uint64_t seed : seeds) {
    TrainConfig cfg = base;
    cfg.mode = TrainMode::Erm;
    cfg.seed = seed;
    if (cfg.k <= 0.0) cfg.k = std::sqrt(static_cast<double>(train_set.n));
    erm_runs.push_back(train(spec, train_set, ChannelSpec{}, cfg));
  }

  json log = json::array();
  std::ostringstream csv;
  csv << "Scenario,ERM risk,Ours risk,Bound,L_hat_S,K_hat_Omega,KL_over_k\r\n";

  for (const auto& sc : scenarios) {
    double erm_sum = 0.0, ours_sum = 0.0, bound_sum = 0.0;
    double lhat_sum = 0.0, pen_sum = 0.0, kl_sum = 0.0;
    for (std::size_t si = 0; si < seeds.size(); ++si) {
      const std::uint64_t seed = seeds[si];
      TrainConfig cfg = base;
      cfg.mode = TrainMode::ChannelAware;
      cfg.seed = seed;
      if (cfg.k <= 0.0) cfg.k = std::sqrt(static_cast<double>(train_set.n));
      const TrainResult ours = train(spec, train_set, sc.channel, cfg);

      Rng eval_rng(seed, "channel");
      const auto erm_est = estimate_population_risk(
          ModelRef::of(erm_runs[si].params), spec, *test_set, sc.channel,
          channel_draws, 1, eval_rng.derived(1));
      const auto ours_est = estimate_population_risk(
          ModelRef::of(ours.posterior), spec, *test_set, sc.channel,
          channel_draws, weight_draws, eval_rng.derived(2));
      const double lhat =
          empirical_01_risk(ModelRef::of(ours.posterior), spec, train_set,
                            weight_draws, eval_rng.derived(3));

      BoundConfig bc;
      bc.n = static_cast<std::int64_t>(train_set.n);
      bc.k = cfg.k;
      bc.epsilon = eps;
      bc.sigma = sigma;
      bc.lipschitz = ours.stats.khat.back();
      bc.surrogate_lipschitz = true;
      bc.channel = sc.channel;
      const BoundReport rep = compose_bound(bc, lhat, ours.stats.kl.back(),
                                            static_cast<int>(d));

      erm_sum += erm_est.mean_01_loss;
      ours_sum += ours_est.mean_01_loss;
      bound_sum += rep.total;
      lhat_sum += lhat;
      pen_sum += rep.penalty_term + rep.extra_log_term;
      kl_sum += rep.kl_term;
      log.push_back(json{{"scenario", sc.name},
                         {"seed", seed},
                         {"erm_risk", erm_est.mean_01_loss},
                         {"erm_stderr", erm_est.stderr_est},
                         {"ours_risk", ours_est.mean_01_loss},
                         {"ours_stderr", ours_est.stderr_est},
                         {"bound", rep.total},
                         {"empirical_risk", lhat},
                         {"penalty", rep.penalty_term + rep.extra_log_term},
                         {"kl_over_k", rep.kl_term},
                         {"khat", ours.stats.khat.back()}});
    }
    const double m = static_cast<double>(seeds.size());
    csv << sc.name << ',' << fmt_double(erm_sum / m) << ','
        << fmt_double(ours_sum / m) << ',' << fmt_double(bound_sum / m) << ','
        << fmt_double(lhat_sum / m) << ',' << fmt_double(pen_sum / m) << ','
        << fmt_double(kl_sum / m) << "\r\n";
  }

  const std::string csv_text = csv.str();
  const std::string json_text = log.dump(2) + "\n";
  if (!csv_path.empty()) write_text(csv_path, csv_text);
  if (!json_path.empty()) write_text(json_path, json_text);
  if (csv_path.empty()) std::cout << csv_text;
  return 0;
}

// ---------------------------------------------------------------------------
// gradcheck

int run_gradcheck(std::uint64_t seed_base, double net_tol, double obj_tol) {
  double worst_net = 0.0;
  for (std::uint64_t s = 0; s < 10; ++s) {
    const std::uint64_t seed = seed_base + s;
    NetworkSpec spec;
    spec.layers = {{5, 8, Activation::Relu},
                   {8, 6, Activation::Relu},
                   {6, 4, Activation::Identity}};
    spec.split_index = 3;
    spec.classes = 4;
    Rng rng(seed, "init");
    ParamVector w = init_params(spec, 0.4, rng);
    Dataset batch = make_blobs(7, 5, 4, 0.8, seed);
    const auto b = backward(spec, w, batch.features, batch.labels, nullptr);
    // central finite differences on every coordinate
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double h = 1e-5 * (1.0 + std::abs(w[i]));
      ParamVector wp = w, wm = w;
      wp[i] += h;
      wm[i] -= h;
      const double lp =
          backward(spec, wp, batch.features, batch.labels, nullptr).mean_loss;
      const double lm =
          backward(spec, wm, batch.features, batch.labels, nullptr).mean_loss;
      const double fd = (lp - lm) / (2.0 * h);
      const double denom = std::max(std::abs(fd), std::abs(b.grads[i]));
      if (denom < 1e-10) continue;
      worst_net = std::max(worst_net, std::abs(fd - b.grads[i]) / denom);
    }
  }

  // objective gradient in stop_gradient mode at a fixed noise draw
  double worst_obj = 0.0;
  {
    NetworkSpec spec;
    spec.layers = {{4, 6, Activation::Tanh}, {6, 3, Activation::Identity}};
    spec.split_index = 2;
    spec.classes = 3;
    Dataset batch = make_blobs(9, 4, 3, 0.7, seed_base);
    Rng rng(seed_base, "posterior");
    VariationalPosterior post;
    post.mu = init_params(spec, 0.3, rng);
    post.rho.assign(post.mu.size(), softplus_inv(0.2));
    TrainConfig cfg;
    cfg.khat_grad = KhatGradMode::StopGradient;
    cfg.k = 10.0;
    ChannelSpec bec{ChannelKind::Bec, spec.split_dim(), 0.3, 1.0};
    std::vector<double> eps(post.mu.size());
    for (double& e : eps) e = rng.normal();
    KhatCache khat = compute_khat_cache(spec, post, batch.features, batch.labels,
                                        cfg, closed_form_omega(bec, spec.split_dim()));
    const auto base = objective_at(spec, post, batch.features, batch.labels, bec,
                                   cfg, eps, khat, true);
    auto fd_check = [&](std::vector<double>& param, const std::vector<double>& grad) {
      for (std::size_t i = 0; i < param.size(); ++i) {
        const double h = 1e-5 * (1.0 + std::abs(param[i]));
        const double orig = param[i];
        param[i] = orig + h;
        const double jp = objective_at(spec, post, batch.features, batch.labels,
                                       bec, cfg, eps, khat, false).j;
        param[i] = orig - h;
        const double jm = objective_at(spec, post, batch.features, batch.labels,
                                       bec, cfg, eps, khat, false).j;
        param[i] = orig;
        const double fd = (jp - jm) / (2.0 * h);
        const double denom = std::max(std::abs(fd), std::abs(grad[i]));
        if (denom < 1e-8) continue;
        worst_obj = std::max(worst_obj, std::abs(fd - grad[i]) / denom);
      }
    };
    fd_check(post.mu, base.grad_mu);
    fd_check(post.rho, base.grad_rho);
  }

  json out{{"network_max_rel_error", worst_net},
           {"objective_max_rel_error", worst_obj},
           {"network_tolerance", net_tol},
           {"objective_tolerance", obj_tol}};
  std::cout << out.dump(2) << "\n";
  return (worst_net < net_tol && worst_obj < obj_tol) ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"PAC-Bayes bounds and channel-aware training for split inference"};
  app.require_subcommand(1);

  std::string config_path;

  // --- bound ---
  auto* bound_cmd = app.add_subcommand("bound", "closed-form bound report");
  ChannelOpts bound_chan;
  bound_chan.add(*bound_cmd);
  std::size_t bound_d = 2;
  double bound_k = 0.0, bound_K = 0.0, bound_kl = 0.0;
  double bound_eps = 0.025, bound_sigma = 1.0, bound_risk = 0.0;
  std::int64_t bound_n = 10000;
  bound_cmd->add_option("--d", bound_d, "feature dimension at the split");
  bound_cmd->add_option("--k", bound_k, "free parameter k (0 = sqrt(n))");
  bound_cmd->add_option("--n", bound_n, "training-set size");
  bound_cmd->add_option("--K", bound_K, "Lipschitz constant / surrogate");
  bound_cmd->add_option("--kl", bound_kl, "KL divergence value");
  bound_cmd->add_option("--eps", bound_eps, "confidence epsilon");
  bound_cmd->add_option("--sigma", bound_sigma, "sub-Gaussian constant");
  bound_cmd->add_option("--risk", bound_risk, "empirical risk");
  bound_cmd->add_option("--config", config_path, "JSON config file");

  // --- oracle ---
  auto* oracle_cmd = app.add_subcommand("oracle", "oracle vs closed form");
  std::string oracle_target = "omega-rayleigh";
  std::size_t oracle_d = 16;
  double oracle_po = 0.1, oracle_gamma = 1.0;
  std::int64_t oracle_samples = 1000000;
  std::uint64_t oracle_seed = 1;
  oracle_cmd->add_option("--target", oracle_target,
                         "omega-bec | omega-rayleigh | entropy");
  oracle_cmd->add_option("--d", oracle_d, "BEC dimension");
  oracle_cmd->add_option("--po", oracle_po, "BEC outage probability");
  oracle_cmd->add_option("--gamma", oracle_gamma, "Rayleigh SNR (linear)");
  oracle_cmd->add_option("--samples", oracle_samples, "Monte-Carlo samples");
  oracle_cmd->add_option("--seed", oracle_seed, "MC seed");

  // --- train ---
  auto* train_cmd = app.add_subcommand("train", "train ERM or channel-aware");
  DataOpts train_data;
  NetOpts train_net;
  ChannelOpts train_chan;
  train_data.add(*train_cmd);
  train_net.add(*train_cmd);
  train_chan.add(*train_cmd);
  std::string train_mode = "channel_aware", train_khat_grad = "double_backprop_fd";
  std::string train_khat_scope = "all_weights";
  double train_eta1 = 1.0, train_k = 0.0, train_lr = 0.05, train_sigma_p = 0.1;
  double train_clip = 0.0;
  int train_epochs = 10, train_khat_refresh = 10;
  std::size_t train_batch = 64;
  std::uint64_t train_seed = 1;
  bool train_khat_full = false;
  std::string train_init, train_out, train_stats;
  train_cmd->add_option("--mode", train_mode, "erm | channel_aware")
      ->check(CLI::IsMember({"erm", "channel_aware"}));
  train_cmd->add_option("--eta1", train_eta1, "KL weight eta1");
  train_cmd->add_option("--k", train_k, "bound parameter k (0 = sqrt(n))");
  train_cmd->add_option("--lr", train_lr, "learning rate");
  train_cmd->add_option("--epochs", train_epochs, "epochs");
  train_cmd->add_option("--batch-size", train_batch, "mini-batch size");
  train_cmd->add_option("--sigma-p", train_sigma_p, "prior stddev");
  train_cmd->add_option("--seed", train_seed, "root seed");
  train_cmd->add_option("--khat-grad", train_khat_grad,
                        "double_backprop_fd | stop_gradient")
      ->check(CLI::IsMember({"double_backprop_fd", "stop_gradient"}));
  train_cmd->add_option("--khat-scope", train_khat_scope,
                        "all_weights | split_feature")
      ->check(CLI::IsMember({"all_weights", "split_feature"}));
  train_cmd->add_option("--khat-refresh", train_khat_refresh,
                        "steps between gradient-norm refreshes");
  train_cmd->add_flag("--khat-full-dataset", train_khat_full,
                      "refresh the gradient norm on the full dataset");
  train_cmd->add_option("--clip-norm", train_clip,
                        "joint gradient-norm clip (0 = off)");
  train_cmd->add_option("--init-checkpoint", train_init,
                        "warm-start the posterior mean from a checkpoint");
  train_cmd->add_option("--out", train_out, "checkpoint output path");
  train_cmd->add_option("--stats", train_stats, "TrainStats CSV output path");
  train_cmd->add_option("--config", config_path, "JSON config file");

  // --- eval ---
  auto* eval_cmd = app.add_subcommand("eval", "population risk / gap estimate");
  DataOpts eval_test, eval_train;
  ChannelOpts eval_chan;
  eval_test.add(*eval_cmd);
  eval_train.add(*eval_cmd, "train");
  eval_chan.add(*eval_cmd);
  std::string eval_ckpt, eval_out;
  int eval_cd = 32, eval_wd = 8;
  std::uint64_t eval_seed = 1;
  bool eval_gap = false;
  eval_cmd->add_option("--checkpoint", eval_ckpt, "model checkpoint")->required();
  eval_cmd->add_option("--channel-draws", eval_cd, "channel draws per input");
  eval_cmd->add_option("--weight-draws", eval_wd, "posterior weight draws");
  eval_cmd->add_option("--seed", eval_seed, "eval seed");
  eval_cmd->add_flag("--gap", eval_gap,
                     "also estimate the generalization gap (needs --train-* data)");
  eval_cmd->add_option("--out", eval_out, "JSON output path");

  // --- table ---
  auto* table_cmd = app.add_subcommand("table", "scenario sweep report");
  DataOpts table_train, table_test;
  NetOpts table_net;
  table_train.add(*table_cmd);
  table_test.add(*table_cmd, "test");
  table_net.add(*table_cmd);
  std::vector<std::uint64_t> table_seeds = {1, 2, 3};
  double table_eta1 = 1.0, table_k = 0.0, table_lr = 0.05, table_sigma_p = 0.1;
  double table_eps = 0.025, table_sigma = 1.0;
  int table_epochs = 10, table_cd = 32, table_wd = 8, table_khat_refresh = 10;
  std::size_t table_batch = 64;
  bool table_have_test = false, table_khat_full = false;
  std::string table_csv, table_json;
  table_cmd->add_option("--seeds", table_seeds, "seed list")->delimiter(',');
  table_cmd->add_option("--eta1", table_eta1, "KL weight eta1");
  table_cmd->add_option("--k", table_k, "bound parameter k (0 = sqrt(n))");
  table_cmd->add_option("--lr", table_lr, "learning rate");
  table_cmd->add_option("--epochs", table_epochs, "epochs");
  table_cmd->add_option("--batch-size", table_batch, "mini-batch size");
  table_cmd->add_option("--sigma-p", table_sigma_p, "prior stddev");
  table_cmd->add_option("--khat-refresh", table_khat_refresh,
                        "steps between gradient-norm refreshes");
  table_cmd->add_flag("--khat-full-dataset", table_khat_full,
                      "refresh the gradient norm on the full dataset");
  table_cmd->add_option("--channel-draws", table_cd, "channel draws per input");
  table_cmd->add_option("--weight-draws", table_wd, "posterior weight draws");
  table_cmd->add_option("--eps", table_eps, "confidence epsilon");
  table_cmd->add_option("--sigma", table_sigma, "sub-Gaussian constant");
  table_cmd->add_flag("--with-test", table_have_test,
                      "evaluate on the --test-* dataset instead of train");
  table_cmd->add_option("--out-csv", table_csv, "CSV output path");
  table_cmd->add_option("--out-json", table_json, "JSON log output path");
  table_cmd->add_option("--config", config_path, "JSON config file");

  // --- gradcheck ---
  auto* grad_cmd = app.add_subcommand("gradcheck", "finite-difference suites");
  std::uint64_t grad_seed = 1;
  double grad_net_tol = 1e-4, grad_obj_tol = 1e-3;
  grad_cmd->add_option("--seed", grad_seed, "base seed");
  grad_cmd->add_option("--net-tol", grad_net_tol, "network gradient tolerance");
  grad_cmd->add_option("--obj-tol", grad_obj_tol, "objective gradient tolerance");

  try {
    app.parse(argc, argv);
    CLI::App* sub = app.get_subcommands().front();
    if (!config_path.empty()) apply_config(*sub, load_config_file(config_path));

    if (sub == bound_cmd)
      return run_bound(bound_chan, bound_d, bound_k, bound_n, bound_K, bound_kl,
                       bound_eps, bound_sigma, bound_risk);
    if (sub == oracle_cmd)
      return run_oracle(oracle_target, oracle_d, oracle_po, oracle_gamma,
                        oracle_samples, oracle_seed);
    if (sub == train_cmd)
      return run_train(train_data, train_net, train_chan,
                       make_train_config(train_mode, train_eta1, train_k,
                                         train_lr, train_epochs, train_batch,
                                         train_sigma_p, train_seed,
                                         train_khat_grad, train_khat_refresh,
                                         train_khat_full, 0, train_khat_scope,
                                         train_clip),
                       train_init, train_out, train_stats);
    if (sub == eval_cmd)
      return run_eval(eval_ckpt, eval_test, eval_train, eval_gap, eval_chan,
                      eval_cd, eval_wd, eval_seed, eval_out);
    if (sub == table_cmd) {
      TrainConfig base = make_train_config("channel_aware", table_eta1, table_k,
                                           table_lr, table_epochs, table_batch,
                                           table_sigma_p, 1, "double_backprop_fd",
                                           table_khat_refresh, table_khat_full, 0);
      return run_table(table_train, table_test, table_have_test, table_net,
                       table_seeds, base, table_cd, table_wd, table_eps,
                       table_sigma, table_csv, table_json);
    }
    if (sub == grad_cmd)
      return run_gradcheck(grad_seed, grad_net_tol, grad_obj_tol);
    std::cerr << "error: no subcommand\n";
    return 1;
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
