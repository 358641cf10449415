#include "tcinn/cli.hpp"

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "tcinn/checkpoint.hpp"
#include "tcinn/common.hpp"
#include "tcinn/io.hpp"
#include "tcinn/metrics.hpp"
#include "tcinn/model.hpp"
#include "tcinn/ops.hpp"
#include "tcinn/phantom.hpp"
#include "tcinn/train.hpp"

namespace tcinn {
namespace {

int exit_code_for(ErrKind k) {
  switch (k) {
    case ErrKind::io:
    case ErrKind::bad_magic:
    case ErrKind::bad_version:
    case ErrKind::checksum:
    case ErrKind::payload_mismatch:
      return 1;
    case ErrKind::argument:
    case ErrKind::shape:
    case ErrKind::config_mismatch:
    case ErrKind::empty_support:
      return 2;
    case ErrKind::numeric:
      return 3;
  }
  return 1;
}

struct PhantomArgs {
  uint64_t seed = 1;
  int64_t size = 64;
  int64_t pairs = 100;
  std::string out;
};

int run_phantom(const PhantomArgs& a) {
  PhantomConfig cfg;
  cfg.seed = a.seed;
  cfg.size = a.size;
  cfg.pairs = a.pairs;
  const std::string manifest = generate_phantom_dataset(cfg, a.out);
  std::cout << manifest << "\n";
  return 0;
}

struct TrainArgs {
  std::string manifest, out;
  std::string precision = "f32";
  int64_t channels = 3;
  int64_t blocks = 4;
  int64_t layers = 8;
  int64_t growth = 16;
  double alpha = 2.0;
  bool actnorm = false;
  int64_t epochs = 300;
  double lr = 1e-4;
  int64_t halving = 50;
  double lambda = 1.0;
  int64_t batch = 4;
  double clip = 0.0;
  uint64_t seed = 1;
};

template <class T>
int run_train(const TrainArgs& a) {
  const DatasetManifest man = read_manifest(a.manifest);
  check(!man.pairs.empty(), ErrKind::argument, a.manifest + ": manifest lists no pairs");
  std::vector<Tensor<T>> sources, targets;
  sources.reserve(man.pairs.size());
  targets.reserve(man.pairs.size());
  for (const PairEntry& p : man.pairs) {
    sources.push_back(read_tensor_file<T>(p.source));
    targets.push_back(read_tensor_file<T>(p.target));
  }

  TrainConfig cfg;
  cfg.epochs = a.epochs;
  cfg.initial_lr = a.lr;
  cfg.halving_period = a.halving;
  cfg.lambda = a.lambda;
  cfg.batch_size = a.batch;
  cfg.seed = a.seed;
  cfg.grad_clip = a.clip;
  cfg.model.channels = a.channels;
  cfg.model.split = 0;  // let normalize() pick floor(C/2)
  cfg.model.blocks = a.blocks;
  cfg.model.layers = a.layers;
  cfg.model.growth = a.growth;
  cfg.model.alpha = a.alpha;
  cfg.model.actnorm = a.actnorm;
  cfg.model.normalize();
  cfg.validate();

  std::filesystem::create_directories(a.out);
  const std::string loss_path = a.out + "/loss.csv";
  const std::string ckpt_path = a.out + "/model.ckpt";

  std::vector<LossRow> rows;
  auto on_epoch = [&](const LossRow& r) {
    rows.push_back(r);
    write_loss_csv(rows, loss_path);  // streamed so partial runs keep their curve
    std::cerr << "epoch " << r.epoch << "/" << cfg.epochs << "  loss " << r.total << "  lr "
              << r.lr << "\n";
  };
  const TrainResult<T> res = train(sources, targets, cfg, on_epoch);

  write_loss_csv(res.curve, loss_path);
  save_checkpoint(res.model, res.adam, cfg.epochs, res.rng_state, ckpt_path);
  std::cout << ckpt_path << "\n" << loss_path << "\n";
  return 0;
}

struct InferArgs {
  std::string ckpt, input, out;
  std::string direction = "forward";
};

// Accepts [H,W], [1,H,W] or [N,1,H,W] inputs; returns the 4-d view and
// remembers the original rank so the output keeps the caller's layout.
template <class T>
Tensor<T> as_nchw(const Tensor<T>& img, size_t* orig_rank) {
  *orig_rank = img.shape.size();
  Tensor<T> out = img;
  if (img.shape.size() == 2) {
    out.shape = {1, 1, img.shape[0], img.shape[1]};
  } else if (img.shape.size() == 3) {
    check(img.shape[0] == 1, ErrKind::shape, "expected a single-channel [1,H,W] image");
    out.shape = {1, 1, img.shape[1], img.shape[2]};
  } else {
    check(img.shape.size() == 4 && img.shape[1] == 1, ErrKind::shape,
          "expected a single-channel image ([H,W], [1,H,W] or [N,1,H,W])");
  }
  return out;
}

template <class T>
int run_infer(const InferArgs& a) {
  const CheckpointData<T> ck = load_checkpoint<T>(a.ckpt);
  const Model<T> model = model_from_checkpoint(ck);
  size_t rank = 0;
  const Tensor<T> img = as_nchw(read_tensor_file<T>(a.input), &rank);
  const Tensor<T> aug = augment_channels(img, model.cfg.channels);
  const Tensor<T> mapped =
      a.direction == "forward" ? model_forward(aug, model) : model_inverse(aug, model);
  Tensor<T> out = collapse_channels(mapped);
  if (rank == 2)
    out.shape = {out.shape[2], out.shape[3]};
  else if (rank == 3)
    out.shape = {1, out.shape[2], out.shape[3]};
  write_tensor_file(out, a.out);
  if (scale_record_exists(a.input)) write_scale_record(read_scale_record(a.input), a.out);
  std::cout << a.out << "\n";
  return 0;
}

struct EvalArgs {
  std::string manifest, ckpt, pred_dir, report;
  std::string ssim_mode = "windowed";
  double mae_eps = 0.01;
  double suv_id = 0.0;
  double suv_weight = 0.0;
  std::string voi;
  double voi_voxel_ml = 1.0;
};

template <class T>
Tensor<double> predict_with_model(const Model<T>& model, const std::string& src_path) {
  size_t rank = 0;
  const Tensor<T> img = as_nchw(read_tensor_file<T>(src_path), &rank);
  const Tensor<T> pred = collapse_channels(
      model_forward(augment_channels(img, model.cfg.channels), model));
  Tensor<double> out({pred.shape[0], 1, pred.shape[2], pred.shape[3]});
  for (int64_t i = 0; i < pred.size(); ++i) out.v[i] = static_cast<double>(pred.v[i]);
  return out;
}

int run_eval(const EvalArgs& a) {
  const DatasetManifest man = read_manifest(a.manifest);
  check(!man.pairs.empty(), ErrKind::argument, a.manifest + ": manifest lists no pairs");

  EvalOptions opt;
  opt.ssim_mode = a.ssim_mode == "global" ? SsimMode::global : SsimMode::windowed;
  opt.mae_eps = a.mae_eps;
  VOIMask mask;
  SUVParams suv;
  if (!a.voi.empty()) {
    const Tensor<double> mraw = read_tensor_file<double>(a.voi);
    mask.active = Tensor<uint8_t>(mraw.shape);
    for (int64_t i = 0; i < mraw.size(); ++i) mask.active.v[i] = mraw.v[i] > 0.5 ? 1 : 0;
    mask.voxel_volume_ml = a.voi_voxel_ml;
    suv.injected_dose_mci = a.suv_id;
    suv.body_weight_kg = a.suv_weight;
    opt.voi = &mask;
    opt.suv = &suv;
  }

  // Model predictions run at the checkpoint's stored precision.
  Model<float> model32;
  Model<double> model64;
  bool use64 = false;
  if (!a.ckpt.empty()) {
    if (read_checkpoint_info(a.ckpt).dtype == 0) {
      model32 = model_from_checkpoint(load_checkpoint<float>(a.ckpt));
    } else {
      model64 = model_from_checkpoint(load_checkpoint<double>(a.ckpt));
      use64 = true;
    }
  }

  std::vector<PairMetrics> pms;
  for (size_t i = 0; i < man.pairs.size(); ++i) {
    const PairEntry& p = man.pairs[i];
    try {
      const Tensor<double> ref01 = read_tensor_file<double>(p.target);
      Tensor<double> pred01;
      if (!a.pred_dir.empty()) {
        const std::string base = std::filesystem::path(p.source).filename().string();
        pred01 = read_tensor_file<double>(a.pred_dir + "/" + base);
      } else {
        pred01 = use64 ? predict_with_model(model64, p.source)
                       : predict_with_model(model32, p.source);
      }
      check(pred01.size() == ref01.size(), ErrKind::shape,
            "prediction/reference element counts differ for pair " + std::to_string(i));
      pred01.shape = ref01.shape;
      pms.push_back(evaluate_pair(static_cast<int64_t>(i), ref01, pred01,
                                  read_scale_record(p.target), opt));
    } catch (const TcError& e) {
      PairMetrics bad;
      bad.pair_id = static_cast<int64_t>(i);
      bad.ok = false;
      bad.error = e.what();
      pms.push_back(bad);
    }
  }

  const MetricsReport rep = aggregate_report(std::move(pms));
  write_report_csv(rep, a.report);

  int64_t ok = 0;
  double excl = 0.0;
  for (const PairMetrics& m : rep.pairs) {
    if (m.ok) {
      ++ok;
      excl += m.mae_excluded_fraction;
    } else {
      std::cerr << "pair " << m.pair_id << " failed: " << m.error << "\n";
    }
  }
  std::cout << a.report << "\n";
  if (ok > 0) {
    std::printf("pairs evaluated: %lld/%zu\n", static_cast<long long>(ok), rep.pairs.size());
    std::printf("mean: psnr_db=%s ssim=%.6g rmse_pct=%.6g mae_pct=%.6g\n",
                rep.mean.psnr_all_infinite ? "inf" : std::to_string(rep.mean.psnr_db).c_str(),
                rep.mean.ssim_v, rep.mean.rmse_pct, rep.mean.mae_pct);
    std::printf("mean MAE-mask excluded fraction: %.6g\n", excl / static_cast<double>(ok));
  }
  return ok > 0 ? 0 : 1;
}

// Flat "key=value" config text: '#' comments and blank lines allowed, keys
// name long options of the subcommand the file is passed to.
std::vector<std::pair<std::string, std::string>> read_config_entries(const std::string& path) {
  std::ifstream f(path);
  check(f.good(), ErrKind::io, "cannot read config file: " + path);
  auto trim = [](std::string s) {
    const char* ws = " \t";
    const size_t b = s.find_first_not_of(ws);
    if (b == std::string::npos) return std::string();
    return s.substr(b, s.find_last_not_of(ws) - b + 1);
  };
  std::vector<std::pair<std::string, std::string>> entries;
  std::string line;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const size_t eq = line.find('=');
    check(eq != std::string::npos && eq > 0, ErrKind::argument,
          path + ":" + std::to_string(lineno) + ": expected key=value");
    entries.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return entries;
}

// Expands "--config FILE" into ordinary option tokens before parsing, so the
// stated precedence holds exactly: command-line flags override file entries,
// file entries override built-in defaults. A key the user already passed on
// the command line is skipped instead of injected.
std::vector<std::string> expand_config_args(std::vector<std::string> args, const CLI::App* sub) {
  std::string path;
  for (size_t i = 2; i < args.size(); ++i) {
    if (args[i] == "--config") {
      check(i + 1 < args.size(), ErrKind::argument, "--config needs a file path");
      path = args[i + 1];
      args.erase(args.begin() + static_cast<std::ptrdiff_t>(i), args.begin() + static_cast<std::ptrdiff_t>(i) + 2);
      break;
    }
    if (args[i].rfind("--config=", 0) == 0) {
      path = args[i].substr(9);
      args.erase(args.begin() + static_cast<std::ptrdiff_t>(i));
      break;
    }
  }
  if (path.empty()) return args;

  for (const auto& [key, value] : read_config_entries(path)) {
    const std::string opt = "--" + key;
    check(sub->get_option_no_throw(opt) != nullptr, ErrKind::argument,
          path + ": unknown config key '" + key + "'");
    bool given = false;
    for (size_t i = 2; i < args.size() && !given; ++i)
      given = args[i] == opt || args[i].rfind(opt + "=", 0) == 0;
    if (!given) args.push_back(opt + "=" + value);
  }
  return args;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{
      "Invertible translation between paired PET tracer images: synthetic data "
      "generation, bidirectional training, inference, and evaluation."};
  app.require_subcommand(1);

  PhantomArgs pa;
  CLI::App* ph = app.add_subcommand("phantom", "Generate a deterministic synthetic paired dataset");
  ph->add_option("--seed", pa.seed, "dataset RNG seed")->capture_default_str();
  ph->add_option("--size", pa.size, "square image size (>= 16)")
      ->check(CLI::Range(int64_t{16}, int64_t{4096}))
      ->capture_default_str();
  ph->add_option("--pairs", pa.pairs, "number of image pairs")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  ph->add_option("--out", pa.out, "output directory")->required();

  TrainArgs ta;
  CLI::App* tr = app.add_subcommand("train", "Train the invertible mapping on a paired manifest");
  tr->add_option("--manifest", ta.manifest, "dataset manifest file")->required();
  tr->add_option("--out", ta.out, "output directory for model.ckpt and loss.csv")->required();
  tr->add_option("--channels", ta.channels, "replicated input channels")
      ->check(CLI::IsMember({3, 6, 9}))
      ->capture_default_str();
  tr->add_option("--blocks", ta.blocks, "invertible blocks k")->capture_default_str();
  tr->add_option("--layers", ta.layers, "conv layers per dense subnet")->capture_default_str();
  tr->add_option("--growth", ta.growth, "dense-connection growth width")->capture_default_str();
  tr->add_option("--alpha", ta.alpha, "scale soft-clamp bound")->capture_default_str();
  tr->add_flag("--actnorm", ta.actnorm, "enable per-channel activation normalization layers");
  tr->add_option("--epochs", ta.epochs, "training epochs (0 = validation dry run)")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  tr->add_option("--lr", ta.lr, "initial learning rate")->capture_default_str();
  tr->add_option("--halving", ta.halving, "epochs between learning-rate halvings")
      ->capture_default_str();
  tr->add_option("--lambda", ta.lambda, "forward-loss weight")->capture_default_str();
  tr->add_option("--batch", ta.batch, "batch size")->capture_default_str();
  tr->add_option("--clip", ta.clip, "global-norm gradient clip (0 = off)")->capture_default_str();
  tr->add_option("--seed", ta.seed, "training seed")->capture_default_str();
  tr->add_option("--precision", ta.precision, "engine precision")
      ->check(CLI::IsMember({"f32", "f64"}))
      ->capture_default_str();
  std::string train_config;
  tr->add_option("--config", train_config,
                 "key=value file; command-line flags override file entries");

  InferArgs ia;
  CLI::App* in = app.add_subcommand("infer", "Map one image through a trained checkpoint");
  in->add_option("--ckpt", ia.ckpt, "checkpoint file")->required();
  in->add_option("--input", ia.input, "input image (TCIT tensor)")->required();
  in->add_option("--out", ia.out, "output image path")->required();
  in->add_option("--direction", ia.direction, "mapping direction")
      ->check(CLI::IsMember({"forward", "inverse"}))
      ->capture_default_str();

  EvalArgs ea;
  CLI::App* ev = app.add_subcommand("eval", "Image-quality metrics over a manifest");
  ev->add_option("--manifest", ea.manifest, "dataset manifest file")->required();
  ev->add_option("--ckpt", ea.ckpt, "checkpoint to run predictions with");
  ev->add_option("--pred-dir", ea.pred_dir,
                 "directory of precomputed predictions named like each pair's source file");
  ev->add_option("--report", ea.report, "output report CSV")->required();
  ev->add_option("--ssim-mode", ea.ssim_mode, "structural-similarity statistics mode")
      ->check(CLI::IsMember({"windowed", "global"}))
      ->capture_default_str();
  ev->add_option("--mae-eps", ea.mae_eps, "reference mask threshold for relative MAE")
      ->capture_default_str();
  ev->add_option("--suv-id", ea.suv_id, "injected dose in mCi (for SUV columns)");
  ev->add_option("--suv-weight", ea.suv_weight, "body weight in kg (for SUV columns)");
  ev->add_option("--voi", ea.voi, "volume-of-interest mask tensor (for SUV columns)");
  ev->add_option("--voi-voxel-ml", ea.voi_voxel_ml, "voxel volume in mL")->capture_default_str();

  try {
    std::vector<std::string> args(argv, argv + argc);
    if (args.size() >= 2 && args[1] == "train") args = expand_config_args(std::move(args), tr);
    std::vector<const char*> cargs;
    cargs.reserve(args.size());
    for (const std::string& s : args) cargs.push_back(s.c_str());
    app.parse(static_cast<int>(cargs.size()), cargs.data());
    if (*ph) return run_phantom(pa);
    if (*tr) return ta.precision == "f64" ? run_train<double>(ta) : run_train<float>(ta);
    if (*in)
      return read_checkpoint_info(ia.ckpt).dtype == 0 ? run_infer<float>(ia)
                                                      : run_infer<double>(ia);
    if (*ev) {
      const bool has_ckpt = !ea.ckpt.empty(), has_pred = !ea.pred_dir.empty();
      check(has_ckpt != has_pred, ErrKind::argument,
            "eval: exactly one of --ckpt or --pred-dir is required");
      const bool suv_any = ea.suv_id != 0.0 || ea.suv_weight != 0.0 || !ea.voi.empty();
      if (suv_any)
        check(ea.suv_id > 0.0 && ea.suv_weight > 0.0 && !ea.voi.empty(), ErrKind::argument,
              "eval: SUV columns need --suv-id, --suv-weight and --voi together");
      return run_eval(ea);
    }
    return 2;
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  } catch (const TcError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace tcinn
