// Command-line front end: transfer, warp-only, similarity, evaluate, losses.

#include <algorithm>
#include <atomic>
#include <fstream>
#include <functional>
#include <future>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "pst/correspondence.hpp"
#include "pst/io.hpp"
#include "pst/metrics.hpp"
#include "pst/pipeline.hpp"

namespace {

using nlohmann::json;
using pst::TransferConfig;

/// Binds CLI flags to a scratch config; only flags actually given on the
/// command line are copied over the (possibly JSON-loaded) base config.
class ConfigFlags {
 public:
  ConfigFlags(CLI::App* app) : app_(app) {}

  template <class T>
  CLI::Option* add(const std::string& name, T TransferConfig::*member, const std::string& help) {
    CLI::Option* opt = app_->add_option(name, scratch_.*member, help);
    appliers_.emplace_back(opt, [this, member](TransferConfig& c) { c.*member = scratch_.*member; });
    return opt;
  }

  CLI::Option* add_path(const std::string& name, std::filesystem::path TransferConfig::*member,
                        const std::string& help) {
    auto holder = std::make_shared<std::string>();
    CLI::Option* opt = app_->add_option(name, *holder, help);
    appliers_.emplace_back(opt, [holder, member](TransferConfig& c) { c.*member = *holder; });
    return opt;
  }

  CLI::Option* add_optional_path(const std::string& name, std::optional<std::filesystem::path> TransferConfig::*member,
                                 const std::string& help) {
    auto holder = std::make_shared<std::string>();
    CLI::Option* opt = app_->add_option(name, *holder, help);
    appliers_.emplace_back(opt, [holder, member](TransferConfig& c) { c.*member = std::filesystem::path(*holder); });
    return opt;
  }

  CLI::Option* add_flag(const std::string& name, bool TransferConfig::*member, const std::string& help) {
    CLI::Option* opt = app_->add_flag(name, scratch_.*member, help);
    appliers_.emplace_back(opt, [this, member](TransferConfig& c) { c.*member = scratch_.*member; });
    return opt;
  }

  CLI::Option* add_query(const std::string& name, const std::string& help) {
    auto holder = std::make_shared<pst::Index>(0);
    CLI::Option* opt = app_->add_option(name, *holder, help);
    appliers_.emplace_back(opt, [holder](TransferConfig& c) { c.similarity_query = *holder; });
    return opt;
  }

  TransferConfig resolve(const std::string& config_path) const {
    TransferConfig cfg = config_path.empty() ? TransferConfig{} : pst::load_transfer_config(config_path);
    for (const auto& [opt, apply] : appliers_)
      if (opt->count() > 0) apply(cfg);
    return cfg;
  }

 private:
  CLI::App* app_;
  TransferConfig scratch_;
  std::vector<std::pair<CLI::Option*, std::function<void(TransferConfig&)>>> appliers_;
};

void add_feature_flags(ConfigFlags& flags) {
  flags.add("--stride", &TransferConfig::stride, "Feature cell size in pixels (default: 8)");
  flags.add("--scales", &TransferConfig::scales, "Feature pyramid levels (default: 3)");
  flags.add("--tau", &TransferConfig::tau, "Softmax temperature of the warp, > 0 (default: 0.01)");
  flags.add("--normalize-features", &TransferConfig::normalize_features,
            "Standardize feature channels per image before correlating (default: true)");
}

void add_model_flags(ConfigFlags& flags) {
  flags.add("--lambda", &TransferConfig::lambda, "Image-branch weight of the cross-attention, >= 0 (default: 1.0)");
  flags.add("--cnt-scale", &TransferConfig::cnt_scale, "Content (high-frequency) conditioning scale (default: 1.0)");
  flags.add("--seed", &TransferConfig::seed, "Seed for the toy denoiser and embeddings (default: 0)");
  flags.add("--train-steps", &TransferConfig::train_steps, "Length T of the noise schedule (default: 1000)");
  flags.add("--beta-start", &TransferConfig::beta_start, "First beta of the linear schedule (default: 0.00085)");
  flags.add("--beta-end", &TransferConfig::beta_end, "Last beta of the linear schedule (default: 0.012)");
  flags.add_flag("--latent-downsample", &TransferConfig::latent_downsample,
                 "Box-downsample images x2 when encoding to latents");
}

std::vector<std::array<std::string, 3>> read_triples(const std::string& path, std::size_t fields) {
  std::ifstream in(path);
  if (!in) throw pst::IoError("cannot open pair list '" + path + "'");
  std::vector<std::array<std::string, 3>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::array<std::string, 3> row;
    std::size_t n = 0;
    while (n < fields && ls >> row[n]) ++n;
    if (n != fields) throw pst::FormatError("pair list line needs " + std::to_string(fields) + " paths: '" + line + "'");
    rows.push_back(row);
  }
  return rows;
}

int run_transfer_command(const TransferConfig& base, const std::string& pair_list, unsigned jobs) {
  if (pair_list.empty()) {
    const auto result = pst::run_transfer(base);
    std::cout << "wrote " << base.out.string() << " (" << result.output.width << "x" << result.output.height << ")\n";
    return 0;
  }
  const auto rows = read_triples(pair_list, 3);
  std::atomic<std::size_t> next{0};
  std::mutex io;
  std::vector<std::string> failures;
  auto worker = [&] {
    for (std::size_t i = next++; i < rows.size(); i = next++) {
      TransferConfig cfg = base;
      cfg.input = rows[i][0];
      cfg.reference = rows[i][1];
      cfg.out = rows[i][2];
      try {
        pst::run_transfer(cfg);
        std::lock_guard lock(io);
        std::cout << "wrote " << cfg.out.string() << '\n';
      } catch (const std::exception& e) {
        std::lock_guard lock(io);
        failures.push_back(cfg.input.string() + ": " + e.what());
      }
    }
  };
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < std::max(1u, jobs); ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  for (const auto& f : failures) std::cerr << "pst: error: " << f << '\n';
  return failures.empty() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Semantic-aware portrait style transfer: correspondence warping, Haar-wavelet conditioning, "
               "AdaIN-Wavelet latent initialization and DDIM sampling with a seeded toy denoiser."};
  app.require_subcommand(1);

  // transfer
  CLI::App* transfer = app.add_subcommand("transfer", "Stylize an input portrait with a reference portrait");
  ConfigFlags transfer_flags(transfer);
  std::string transfer_config, transfer_pairs;
  unsigned jobs = std::max(1u, std::thread::hardware_concurrency());
  transfer->add_option("--config", transfer_config, "JSON file with config keys; explicit flags override it");
  transfer_flags.add_path("--input", &TransferConfig::input, "Input (content) portrait PNG");
  transfer_flags.add_path("--reference", &TransferConfig::reference, "Reference (style) portrait PNG");
  transfer_flags.add_optional_path("--input-mask", &TransferConfig::input_mask, "Input label PNG (pixel = class id)");
  transfer_flags.add_optional_path("--reference-mask", &TransferConfig::reference_mask, "Reference label PNG");
  transfer_flags.add("--regions", &TransferConfig::regions,
                     "Labels whose warped-reference pixels are kept; others come from the input (default: all)")
      ->delimiter(',');
  transfer_flags.add("--num-classes", &TransferConfig::num_classes, "Label count K of the masks (default: max label + 1)");
  transfer_flags.add("--gamma", &TransferConfig::gamma, "Stylization strength in [0, 1] (default: 1.0)");
  add_feature_flags(transfer_flags);
  add_model_flags(transfer_flags);
  transfer_flags.add("--steps-inv", &TransferConfig::steps_inversion, "DDIM inversion steps (default: 10)");
  transfer_flags.add("--steps-sample", &TransferConfig::steps_sampling, "DDIM sampling steps (default: 30)");
  transfer_flags.add("--fixed-point-iters", &TransferConfig::fixed_point_iters,
                     "Fixed-point refinements per inversion step (default: 5)");
  transfer_flags.add("--feather", &TransferConfig::feather, "Region blend width in pixels, 0 = hard (default: 0)");
  transfer_flags.add_path("--out", &TransferConfig::out, "Output PNG; also writes <out>.warped.png");
  transfer_flags.add_query("--similarity-query", "Content cell index; writes <out>.sim.png");
  transfer->add_option("--pair-list", transfer_pairs, "File of 'input reference out' lines processed in parallel");
  transfer->add_option("--jobs", jobs, "Parallel pairs for --pair-list");

  // warp-only
  CLI::App* warp_only = app.add_subcommand("warp-only", "Write the reference warped onto the input");
  ConfigFlags warp_flags(warp_only);
  std::string corr_out;
  warp_flags.add_path("--input", &TransferConfig::input, "Input portrait PNG")->required();
  warp_flags.add_path("--reference", &TransferConfig::reference, "Reference portrait PNG")->required();
  warp_flags.add_path("--out", &TransferConfig::out, "Warped reference PNG")->required();
  add_feature_flags(warp_flags);
  warp_only->add_option("--corr-out", corr_out, "Also write the correlation matrix as NPY [rows, cols]");

  // similarity
  CLI::App* similarity = app.add_subcommand("similarity", "Heatmap of one content cell's correlation row");
  ConfigFlags sim_flags(similarity);
  pst::Index query = 0;
  sim_flags.add_path("--input", &TransferConfig::input, "Input portrait PNG")->required();
  sim_flags.add_path("--reference", &TransferConfig::reference, "Reference portrait PNG")->required();
  sim_flags.add_path("--out", &TransferConfig::out, "Heatmap PNG")->required();
  similarity->add_option("--query", query, "Content grid cell index (row-major)")->required();
  add_feature_flags(sim_flags);

  // evaluate
  CLI::App* evaluate = app.add_subcommand("evaluate", "Gram loss and content distance as JSON lines");
  ConfigFlags eval_flags(evaluate);
  std::vector<std::string> pairs;
  std::string eval_list, eval_out;
  evaluate->add_option("--pair", pairs, "Two PNG paths 'a.png,b.png' (repeatable)")->delimiter(',')->expected(2, -1);
  evaluate->add_option("--pair-list", eval_list, "File of 'a b' lines");
  evaluate->add_option("--out", eval_out, "Write JSON lines here instead of stdout");
  eval_flags.add("--stride", &TransferConfig::stride, "Feature cell size in pixels (default: 8)");
  eval_flags.add("--scales", &TransferConfig::scales, "Feature pyramid levels (default: 3)");

  // losses
  CLI::App* losses = app.add_subcommand("losses", "Evaluate the training objectives on one pair");
  ConfigFlags loss_flags(losses);
  int timestep = 500;
  double lambda_c = pst::kDefaultLambdaCyc, lambda_m = pst::kDefaultLambdaMask;
  loss_flags.add_path("--input", &TransferConfig::input, "Input portrait PNG")->required();
  loss_flags.add_path("--reference", &TransferConfig::reference, "Reference portrait PNG")->required();
  loss_flags.add_optional_path("--input-mask", &TransferConfig::input_mask, "Input label PNG");
  loss_flags.add_optional_path("--reference-mask", &TransferConfig::reference_mask, "Reference label PNG");
  loss_flags.add("--num-classes", &TransferConfig::num_classes, "Label count K (default: max label + 1)");
  add_feature_flags(loss_flags);
  add_model_flags(loss_flags);
  losses->add_option("--t", timestep, "Diffusion timestep for the noise-prediction losses (default: 500)");
  losses->add_option("--lambda-c", lambda_c, "Weight of the cyclic warping loss (default: 1)");
  losses->add_option("--lambda-m", lambda_m, "Weight of the mask warping loss (default: 10)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (transfer->parsed()) {
      return run_transfer_command(transfer_flags.resolve(transfer_config), transfer_pairs, jobs);
    }
    if (warp_only->parsed()) {
      const TransferConfig cfg = warp_flags.resolve("");
      cfg.validate();
      const auto result = pst::warp_reference(pst::read_png(cfg.input), pst::read_png(cfg.reference),
                                              cfg.feature_options(), cfg.tau, cfg.normalize_features);
      pst::write_png(result.warped, cfg.out);
      if (!corr_out.empty()) pst::write_npy(result.correlation.data, corr_out);
      return 0;
    }
    if (similarity->parsed()) {
      const TransferConfig cfg = sim_flags.resolve("");
      cfg.validate();
      const pst::Image reference = pst::read_png(cfg.reference);
      const auto result =
          pst::warp_reference(pst::read_png(cfg.input), reference, cfg.feature_options(), cfg.tau, cfg.normalize_features);
      pst::write_png(pst::crop(pst::similarity_map(result.correlation, query), reference.height, reference.width),
                     cfg.out);
      return 0;
    }
    if (evaluate->parsed()) {
      const TransferConfig cfg = eval_flags.resolve("");
      cfg.validate();
      std::vector<std::array<std::string, 3>> rows;
      if (pairs.size() % 2 != 0) throw pst::PreconditionError("--pair needs two paths");
      for (std::size_t i = 0; i + 1 < pairs.size(); i += 2) rows.push_back({pairs[i], pairs[i + 1], ""});
      if (!eval_list.empty()) {
        const auto listed = read_triples(eval_list, 2);
        rows.insert(rows.end(), listed.begin(), listed.end());
      }
      if (rows.empty()) throw pst::PreconditionError("evaluate needs --pair or --pair-list");
      std::ofstream file;
      if (!eval_out.empty()) {
        file.open(eval_out);
        if (!file) throw pst::IoError("cannot write '" + eval_out + "'");
      }
      std::ostream& os = eval_out.empty() ? std::cout : file;
      for (const auto& row : rows) {
        const pst::Image a = pst::read_png(row[0]);
        const pst::Image b = pst::read_png(row[1]);
        const json line = {{"pair", {row[0], row[1]}},
                           {"gram", pst::gram_loss(a, b, cfg.feature_options())},
                           {"content", pst::content_distance(a, b, cfg.feature_options())}};
        os << line.dump() << '\n';
      }
      return 0;
    }
    if (losses->parsed()) {
      const TransferConfig cfg = loss_flags.resolve("");
      const auto report = pst::evaluate_losses(pst::load_inputs(cfg), cfg, timestep, lambda_c, lambda_m);
      const json out = {{"mask", report.mask ? json(*report.mask) : json(nullptr)},
                        {"cyclic", report.cyclic},
                        {"sem", report.sem},
                        {"rec", report.rec},
                        {"stage1_total", report.stage1_total ? json(*report.stage1_total) : json(nullptr)},
                        {"lambda_c", report.lambda_c},
                        {"lambda_m", report.lambda_m},
                        {"t", report.timestep}};
      std::cout << out.dump() << '\n';
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "pst: error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
