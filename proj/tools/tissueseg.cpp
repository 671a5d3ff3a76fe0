#include <iostream>

#include <CLI11.hpp>

#include "tissueseg/commands.hpp"

using namespace tissueseg;

namespace {

void add_method_flags(CLI::App* cmd, std::vector<std::string>& params) {
  cmd->add_option("--param", params, "Method parameter key=value (repeatable)");
}

void add_common(CLI::App* cmd, int& threads, bool& keep_going) {
  cmd->add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);
  cmd->add_flag("--keep-going", keep_going, "Log per-item failures and continue");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tissue segmentation for whole-slide image thumbnails"};
  app.require_subcommand(1);
  app.set_config("--config", "", "Read options from a key = value file (flags win)");
  std::string suffix = kDefaultMaskSuffix;
  app.add_option("--mask-suffix", suffix, "Mask file stem suffix")->capture_default_str();

  cli::MaskOptions mask;
  mask.threads = cli::default_threads();
  auto* mask_cmd = app.add_subcommand("mask", "Segment images and write <stem>_mask.png");
  mask_cmd->add_option("inputs", mask.inputs, "Image files or directories")->required();
  mask_cmd->add_option("--method", mask.method, "handcrafted | otsu | fesi | tissueloc | histomics")->required();
  add_method_flags(mask_cmd, mask.params);
  mask_cmd->add_option("--out", mask.out, "Output directory")->required();
  mask_cmd->add_flag("!--no-pad", mask.pad, "Segment at native size instead of fit + pad to 1024");
  add_common(mask_cmd, mask.threads, mask.keep_going);

  cli::EvalOptions eval;
  eval.threads = cli::default_threads();
  auto* eval_cmd = app.add_subcommand("eval", "Score predicted masks against ground truth");
  eval_cmd->add_option("pred", eval.pred_dir, "Directory of predicted <id>_mask.png")->required();
  eval_cmd->add_option("gt", eval.gt_dir, "Directory of ground-truth <id>_mask.png")->required();
  eval_cmd->add_option("--out", eval.out, "Report directory")->required();
  eval_cmd->add_option("--label", eval.label, "Method label for the records (default: pred dir name)");
  eval_cmd->add_option("--folds", eval.folds, "Group by K folds (0 = off)")->capture_default_str();
  eval_cmd->add_option("--seed", eval.seed, "Fold seed")->capture_default_str();
  eval_cmd->add_option("--format", eval.format, "Table on stdout: text | csv")->capture_default_str();
  add_common(eval_cmd, eval.threads, eval.keep_going);

  cli::BenchOptions bench;
  bench.threads = cli::default_threads();
  auto* bench_cmd = app.add_subcommand("bench", "Run methods over a corpus, time and score them");
  bench_cmd->add_option("images", bench.images, "Image directory");
  bench_cmd->add_option("--masks", bench.masks, "Ground-truth directory (default: image directory)");
  bench_cmd->add_option("--manifest", bench.manifest, "TSV manifest instead of a directory");
  bench_cmd->add_option("--method", bench.methods, "Method (repeatable; default: all five)");
  add_method_flags(bench_cmd, bench.params);
  bench_cmd->add_option("--out", bench.out, "Report directory")->required();
  bench_cmd->add_flag("--save-masks", bench.save_masks, "Also write masks under <out>/masks/<method>/");
  bench_cmd->add_option("--folds", bench.folds, "Group by K folds (0 = off)")->capture_default_str();
  bench_cmd->add_option("--seed", bench.seed, "Fold seed")->capture_default_str();
  bench_cmd->add_option("--format", bench.format, "Table on stdout: text | csv")->capture_default_str();
  bench_cmd->add_flag("!--no-pad", bench.pad, "Segment at native size instead of fit + pad to 1024");
  add_common(bench_cmd, bench.threads, bench.keep_going);

  cli::FoldsOptions folds;
  auto* folds_cmd = app.add_subcommand("folds", "Print the seeded k-fold assignment");
  folds_cmd->add_option("input", folds.input, "Image directory or TSV manifest")->required();
  folds_cmd->add_option("--folds", folds.folds, "Number of folds")->capture_default_str();
  folds_cmd->add_option("--seed", folds.seed, "Shuffle seed")->capture_default_str();
  folds_cmd->add_option("--format", folds.format, "text | csv")->capture_default_str();
  folds_cmd->add_option("--out", folds.out, "Write to a file instead of stdout");

  cli::ServeOptions serve;
  auto* serve_cmd = app.add_subcommand("serve", "Run the mask review service");
  serve_cmd->add_option("corpus", serve.corpus, "Corpus directory (images and masks)")->required();
  serve_cmd->add_option("--port", serve.port, "Port (0 = any free port)")->capture_default_str();
  serve_cmd->add_option("--host", serve.host, "Bind address")->capture_default_str();
  serve_cmd->add_option("--ui", serve.ui, "Built UI bundle to serve at /");
  serve_cmd->add_option("--workers", serve.workers, "Concurrent segmentation jobs")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return cli::kExitUsage;
  }

  mask.mask_suffix = eval.mask_suffix = bench.mask_suffix = folds.mask_suffix = serve.mask_suffix = suffix;
  if (bench.methods.empty()) {
    for (auto id : kAllMethods) bench.methods.emplace_back(method_name(id));
  }

  try {
    if (*mask_cmd) return cli::cmd_mask(mask, std::cout, std::cerr);
    if (*eval_cmd) return cli::cmd_eval(eval, std::cout, std::cerr);
    if (*bench_cmd) return cli::cmd_bench(bench, std::cout, std::cerr);
    if (*folds_cmd) return cli::cmd_folds(folds, std::cout, std::cerr);
    if (*serve_cmd) return cli::cmd_serve(serve, std::cout, std::cerr);
  } catch (const cli::UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return cli::kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return cli::kExitFailure;
  }
  return cli::kExitUsage;
}
