#include "perceiver/cli/commands.hpp"

#include "perceiver/datasets.hpp"
#include "perceiver/ingestion.hpp"
#include "perceiver/io/checkpoint.hpp"
#include "perceiver/io/csv.hpp"
#include "perceiver/io/pgm.hpp"
#include "perceiver/optim.hpp"
#include "perceiver/positional.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cctype>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <utility>

namespace perceiver::cli {
namespace {

// ---- enum <-> text --------------------------------------------------------------

const char* arrangement_name(Arrangement a) {
  return a == Arrangement::interleaved ? "interleaved" : "at_start";
}

const char* sharing_name(TowerSharing s) {
  return s == TowerSharing::shared ? "shared" : "unshared";
}

const char* loss_name(LossMode m) { return m == LossMode::softmax ? "softmax" : "sigmoid"; }

Arrangement parse_arrangement(const std::string& s) {
  if (s == "interleaved") return Arrangement::interleaved;
  if (s == "at_start") return Arrangement::at_start;
  throw config_error("config: model.arrangement must be 'interleaved' or 'at_start', got '" +
                     s + "'");
}

TowerSharing parse_sharing(const std::string& s) {
  if (s == "shared") return TowerSharing::shared;
  if (s == "unshared") return TowerSharing::unshared;
  throw config_error("config: model.tower_sharing must be 'shared' or 'unshared', got '" + s +
                     "'");
}

LossMode parse_loss(const std::string& s) {
  if (s == "softmax") return LossMode::softmax;
  if (s == "sigmoid") return LossMode::sigmoid;
  throw config_error("config: model.loss_mode must be 'softmax' or 'sigmoid', got '" + s + "'");
}

std::string join_sizes(const std::vector<std::size_t>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ", ";
    out += std::to_string(values[i]);
  }
  return out;
}

// ---- config loading -------------------------------------------------------------

io::ConfigMap load_config(const std::string& path, const std::vector<std::string>& sets) {
  io::ConfigMap cfg = path.empty() ? io::ConfigMap() : io::ConfigMap::parse_file(path);
  for (const std::string& kv : sets) {
    const std::size_t eq = kv.find('=');
    if (eq == std::string::npos || eq == 0)
      throw config_error("--set expects KEY=VALUE, got '" + kv + "'");
    auto trim = [](std::string s) {
      const auto a = s.find_first_not_of(" \t");
      const auto b = s.find_last_not_of(" \t");
      return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    cfg.set(trim(kv.substr(0, eq)), trim(kv.substr(eq + 1)));
  }
  return cfg;
}

// Every command consumes the full schema so a typo in any section is caught
// regardless of which subcommand reads the file.
struct FullConfig {
  PerceiverConfig model;
  DatasetSpec dataset;
  TrainSettings train;
  accounting::TransformerConfig baseline;
  std::size_t count_rows = 0;
  std::vector<std::size_t> bench_rows;
};

FullConfig parse_full(io::ConfigMap& cfg) {
  FullConfig full;
  full.model = model_from_config(cfg);
  full.dataset = dataset_from_config(cfg);
  full.train = train_from_config(cfg);
  full.baseline = baseline_from_config(cfg);
  full.count_rows = cfg.get_size("count.byte_rows", 0);
  full.bench_rows = cfg.get_size_list("bench.rows", {1024, 2048, 4096, 8192});
  cfg.require_all_consumed();
  return full;
}

Dataset<float> build_dataset(const DatasetSpec& spec) {
  if (spec.kind == "file") {
    if (spec.path.empty())
      throw config_error("config: dataset.path is required when dataset.kind = file");
    return load_dataset<float>(spec.path);
  }
  GeneratorOverrides tweak;
  tweak.num_bands = spec.num_bands;
  tweak.max_resolution = spec.max_resolution;
  return make_synthetic<float>(spec.kind, spec.train_examples, spec.test_examples, spec.seed,
                               tweak);
}

// model.input_channels = 0 / num_classes = 0 mean "take it from the dataset".
void resolve_model_to_data(PerceiverConfig& model, const Dataset<float>& data) {
  if (data.train.empty()) throw config_error("config: dataset has no training examples");
  const std::size_t cols = data.train[0].input.cols();
  if (model.input_channels == 0) model.input_channels = cols;
  if (model.input_channels != cols)
    throw config_error("config: model.input_channels = " +
                       std::to_string(model.input_channels) + " but dataset '" + data.name +
                       "' provides " + std::to_string(cols) + " channels");
  if (model.num_classes == 0) model.num_classes = data.num_classes;
}

// ---- training runner (train + sweep) ---------------------------------------------

struct RunSummary {
  TrainResult result;
  double test_accuracy = -1.0;  // -1 when no test split or the run diverged
  std::size_t param_count = 0;
  std::size_t byte_rows = 0;
  std::size_t byte_cols = 0;
  std::string dataset_name;
};

RunSummary run_training(io::ConfigMap cfg, const std::string& run_dir) {
  FullConfig full = parse_full(cfg);
  Dataset<float> data = build_dataset(full.dataset);
  resolve_model_to_data(full.model, data);

  Rng model_rng(full.train.model_seed);
  Perceiver<float> model(full.model, model_rng);
  LambConfig opt_cfg;
  opt_cfg.weight_decay = full.train.weight_decay;
  Lamb<float> opt(model.params(), opt_cfg);
  StepDecaySchedule schedule(full.train.base_lr, full.train.decay_factor,
                             full.train.decay_epochs, full.train.steps_per_epoch);

  full.train.options.run_dir = run_dir;
  full.train.options.config_text =
      resolved_config(full.model, full.dataset, full.train).serialize();
  std::filesystem::create_directories(run_dir);
  std::ofstream resolved(run_dir + "/resolved.cfg");
  if (!resolved) throw std::runtime_error("cannot write " + run_dir + "/resolved.cfg");
  resolved << full.train.options.config_text;
  resolved.close();

  RunSummary summary;
  summary.param_count = model.registered_param_count();
  summary.byte_rows = data.train[0].input.rows();
  summary.byte_cols = data.train[0].input.cols();
  summary.dataset_name = data.name;
  summary.result = train(model, opt, schedule, data, full.train.options);
  if (!summary.result.diverged && !data.test.empty())
    summary.test_accuracy = evaluate(model, data.test);
  return summary;
}

std::string sanitize_for_path(const std::string& s) {
  std::string out;
  for (char c : s)
    out += (std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '-') ? c : '_';
  return out;
}

std::string csv_safe(std::string s) {
  for (char& c : s)
    if (c == ',' || c == '\n' || c == '\r') c = ';';
  return s;
}

// ---- subcommands ------------------------------------------------------------------

int cmd_train(const std::string& config_path, const std::vector<std::string>& sets,
              const std::string& run_dir) {
  RunSummary s = run_training(load_config(config_path, sets), run_dir);
  std::cout << "dataset '" << s.dataset_name << "': byte array " << s.byte_rows << " x "
            << s.byte_cols << "\n";
  std::cout << "parameters: " << s.param_count << "\n";
  std::cout << "steps_run: " << s.result.steps_run << "\n";
  std::cout << "last_loss: " << io::format_number(s.result.last_loss) << "\n";
  std::cout << "last_train_accuracy: " << io::format_number(s.result.last_accuracy) << "\n";
  if (s.result.diverged) {
    std::cerr << "training diverged: " << s.result.divergence_message << "\n";
    return 1;
  }
  if (s.test_accuracy >= 0.0)
    std::cout << "test_accuracy: " << io::format_number(s.test_accuracy) << "\n";
  std::cout << "run directory: " << run_dir << "\n";
  return 0;
}

int cmd_count(const std::string& config_path, const std::vector<std::string>& sets,
              std::size_t rows_override, const std::string& out_path) {
  io::ConfigMap cfg = load_config(config_path, sets);
  FullConfig full = parse_full(cfg);
  const std::size_t m = rows_override != 0 ? rows_override : full.count_rows;
  if (m == 0)
    throw config_error("count: byte rows must be >= 1 (set count.byte_rows or pass --rows)");
  full.model.validate();

  const accounting::CountReport report = accounting::count(full.model, m);
  std::ostringstream csv;
  csv << "layer,params,flops\n";
  for (const accounting::CountRow& row : report.rows)
    csv << row.layer << "," << row.params << "," << row.flops << "\n";
  if (out_path.empty()) {
    std::cout << csv.str();
  } else {
    std::ofstream out(out_path);
    if (!out) throw std::runtime_error("count: cannot open '" + out_path + "'");
    out << csv.str();
    std::cout << "breakdown written to " << out_path << "\n";
  }
  std::cout << "byte_rows: " << m << "\n";
  std::cout << "total_params: " << report.total_params << "\n";
  std::cout << "params_excluding_head: " << report.params_excluding_head << "\n";
  std::cout << "total_flops_unfused: " << report.total_flops << "\n";
  std::cout << "total_flops_fused: " << report.fused_flops() << "\n";
  return 0;
}

int cmd_bench(const std::string& config_path, const std::vector<std::string>& sets,
              const std::vector<std::size_t>& rows_cli, std::size_t runs, bool no_wall,
              const std::string& out_path) {
  io::ConfigMap cfg = load_config(config_path, sets);
  FullConfig full = parse_full(cfg);
  const std::vector<std::size_t>& rows = rows_cli.empty() ? full.bench_rows : rows_cli;
  if (rows.empty()) throw config_error("bench: no byte-row counts given");
  if (runs == 0) throw config_error("bench: --runs must be >= 1");
  full.model.validate();

  std::optional<Perceiver<float>> model;
  if (!no_wall) {
    Rng model_rng(full.train.model_seed);
    model.emplace(full.model, model_rng);
  }

  std::vector<std::string> header = {"byte_rows", "perceiver_flops", "transformer_flops"};
  if (!no_wall) header.push_back("wall_seconds");
  std::ostringstream csv;
  for (std::size_t i = 0; i < header.size(); ++i) csv << (i ? "," : "") << header[i];
  csv << "\n";

  for (std::size_t m : rows) {
    if (m == 0) throw config_error("bench: byte rows must be >= 1");
    const accounting::CountReport report = accounting::count(full.model, m);
    const accounting::count_t baseline = accounting::transformer_flops(full.baseline, m);
    csv << m << "," << report.total_flops << "," << baseline;
    if (model) {
      Tensor<float> bytes({m, full.model.input_channels});
      Rng data_rng(m * 7919 + 17);
      for (std::size_t i = 0; i < bytes.size(); ++i)
        bytes.data()[i] = static_cast<float>(data_rng.uniform(-1.0, 1.0));
      GridMeta meta;
      meta.axes = {m};
      meta.source = "bench rows";
      ByteArray<float> input = ByteArray<float>::single(bytes, "bench", meta);
      std::vector<double> seconds;
      for (std::size_t r = 0; r < runs; ++r) {
        const auto t0 = std::chrono::steady_clock::now();
        model->forward(input, nullptr);
        const auto t1 = std::chrono::steady_clock::now();
        seconds.push_back(std::chrono::duration<double>(t1 - t0).count());
      }
      std::sort(seconds.begin(), seconds.end());
      const double median = seconds.size() % 2 == 1
                                ? seconds[seconds.size() / 2]
                                : 0.5 * (seconds[seconds.size() / 2 - 1] +
                                         seconds[seconds.size() / 2]);
      csv << "," << io::format_number(median);
    }
    csv << "\n";
  }

  std::cout << csv.str();
  if (!out_path.empty()) {
    std::ofstream out(out_path);
    if (!out) throw std::runtime_error("bench: cannot open '" + out_path + "'");
    out << csv.str();
    std::cout << "written to " << out_path << "\n";
  }
  return 0;
}

int cmd_permute_eval(const std::string& config_path, const std::vector<std::string>& sets,
                     std::size_t inputs, std::size_t rows, std::uint64_t seed,
                     const std::string& out_path) {
  io::ConfigMap cfg = load_config(config_path, sets);
  FullConfig full = parse_full(cfg);
  if (inputs == 0 || rows == 0)
    throw config_error("permute-eval: --inputs and --rows must be >= 1");
  if (full.model.input_channels == 0 || full.model.num_classes == 0) {
    // Inputs here are random, but "0 = infer from dataset" should work the
    // same as in every other command; only the width and class count matter.
    const Dataset<float> data = build_dataset(full.dataset);
    resolve_model_to_data(full.model, data);
  }
  full.model.validate();

  Rng model_rng(full.train.model_seed);
  Perceiver<float> model(full.model, model_rng);
  ConvProbe<float> probe(full.model.input_channels, 16, full.model.num_classes, model_rng);
  const PermutationSpec perm = make_permutation(rows, seed + 1);
  Rng data_rng(seed);

  auto rel_diff = [](const std::vector<double>& a, const std::vector<double>& b) {
    double num = 0.0, den = 1e-30;
    for (std::size_t i = 0; i < a.size(); ++i) {
      num = std::max(num, std::abs(a[i] - b[i]));
      den = std::max(den, std::abs(a[i]));
    }
    return num / den;
  };
  auto to_vec = [](const Tensor<float>& t) {
    std::vector<double> v(t.size());
    for (std::size_t i = 0; i < t.size(); ++i) v[i] = t.data()[i];
    return v;
  };

  std::optional<io::CsvWriter> out;
  if (!out_path.empty())
    out.emplace(out_path, std::vector<std::string>{"input", "model_rel_diff", "probe_rel_diff"});

  double worst_model = 0.0, worst_probe = 0.0;
  for (std::size_t i = 0; i < inputs; ++i) {
    Tensor<float> bytes({rows, full.model.input_channels});
    for (std::size_t j = 0; j < bytes.size(); ++j)
      bytes.data()[j] = static_cast<float>(data_rng.uniform(-1.0, 1.0));
    GridMeta meta;
    meta.axes = {rows};
    meta.source = "random probe rows";
    const ByteArray<float> original = ByteArray<float>::single(bytes, "probe", meta);
    const ByteArray<float> permuted = permute_bytes(original, perm);

    const double model_diff = rel_diff(to_vec(model.forward(original, nullptr)),
                                       to_vec(model.forward(permuted, nullptr)));
    const double probe_diff =
        rel_diff(probe.forward(original.data), probe.forward(permuted.data));
    worst_model = std::max(worst_model, model_diff);
    worst_probe = std::max(worst_probe, probe_diff);
    if (out) out->row({static_cast<double>(i), model_diff, probe_diff});
  }

  std::cout << "inputs: " << inputs << ", rows per input: " << rows << "\n";
  std::cout << "model_max_relative_logit_change: " << io::format_number(worst_model) << "\n";
  std::cout << "conv_probe_max_relative_logit_change: " << io::format_number(worst_probe)
            << "\n";
  return 0;
}

int cmd_attmaps(const std::string& config_path, const std::vector<std::string>& sets,
                const std::string& checkpoint, const std::string& out_dir,
                const std::vector<std::size_t>& latents, long long attend_sel) {
  io::ConfigMap cfg = load_config(config_path, sets);
  FullConfig full = parse_full(cfg);
  Dataset<float> data = build_dataset(full.dataset);
  resolve_model_to_data(full.model, data);
  const Example<float>& example = data.test.empty() ? data.train.at(0) : data.test.at(0);

  Rng model_rng(full.train.model_seed);
  Perceiver<float> model(full.model, model_rng);
  if (!checkpoint.empty()) {
    ParamSet<float> params = model.params();
    io::load_checkpoint(checkpoint, params);
  }

  std::vector<std::size_t> positions;
  if (attend_sel < 0) {
    for (std::size_t i = 0; i < full.model.num_cross_attends; ++i) positions.push_back(i);
  } else {
    if (static_cast<std::size_t>(attend_sel) >= full.model.num_cross_attends)
      throw config_error("attmaps: --attend " + std::to_string(attend_sel) +
                         " out of range (model has " +
                         std::to_string(full.model.num_cross_attends) + " cross-attends)");
    positions.push_back(static_cast<std::size_t>(attend_sel));
  }

  model.set_capture(true);
  model.forward(example.input, nullptr);
  std::filesystem::create_directories(out_dir);

  const std::vector<std::size_t>& axes = example.input.position_meta.axes;
  std::size_t csv_files = 0, pgm_files = 0;
  for (std::size_t pos : positions) {
    const AttentionMaps<float>& maps = model.cross_maps(pos);
    for (std::size_t h = 0; h < maps.heads; ++h) {
      const std::string stem =
          out_dir + "/attend" + std::to_string(pos) + "_head" + std::to_string(h);
      io::write_matrix_csv(stem + ".csv", maps.head(h), maps.queries, maps.keys);
      ++csv_files;
      for (std::size_t n : latents) {
        if (n >= maps.queries)
          throw config_error("attmaps: --latents " + std::to_string(n) +
                             " out of range (model has " + std::to_string(maps.queries) +
                             " latents)");
        // Images (and anything else with a 2-D position grid) also get a PGM
        // rendering of one latent's attention over the grid.
        if (axes.size() == 2 && axes[0] * axes[1] == maps.keys) {
          io::write_pgm(stem + "_latent" + std::to_string(n) + ".pgm",
                        maps.head(h) + n * maps.keys, axes[0], axes[1]);
          ++pgm_files;
        }
      }
    }
  }
  std::cout << "wrote " << csv_files << " map csv files and " << pgm_files
            << " pgm images to " << out_dir << "\n";
  if (axes.size() != 2 && !latents.empty())
    std::cout << "(no pgm output: byte rows of '" << data.name
              << "' do not form a 2-D grid)\n";
  return 0;
}

int cmd_sweep(const std::string& config_path, const std::vector<std::string>& sets,
              const std::string& axis, const std::vector<std::string>& values,
              const std::string& run_dir) {
  if (values.empty()) throw config_error("sweep: at least one --values entry is required");
  std::filesystem::create_directories(run_dir);
  io::CsvWriter table(run_dir + "/sweep.csv",
                      {"axis", "value", "status", "steps_run", "last_loss", "train_accuracy",
                       "test_accuracy", "run_dir"});

  for (const std::string& value : values) {
    const std::string point_dir =
        run_dir + "/" + sanitize_for_path(axis) + "_" + sanitize_for_path(value);
    std::vector<std::string> row = {axis, csv_safe(value)};
    std::string status_line;
    try {
      io::ConfigMap cfg = load_config(config_path, sets);
      cfg.set(axis, value);
      const RunSummary s = run_training(std::move(cfg), point_dir);
      row.push_back(s.result.diverged ? "diverged" : "ok");
      row.push_back(std::to_string(s.result.steps_run));
      row.push_back(io::format_number(s.result.last_loss));
      row.push_back(io::format_number(s.result.last_accuracy));
      row.push_back(s.test_accuracy >= 0.0 ? io::format_number(s.test_accuracy) : "");
      if (s.result.diverged)
        status_line = "diverged (" + s.result.divergence_message + ")";
      else
        status_line = s.test_accuracy >= 0.0
                          ? "ok, test_accuracy=" + io::format_number(s.test_accuracy)
                          : "ok";
    } catch (const std::exception& e) {
      row.push_back("error: " + csv_safe(e.what()));
      row.insert(row.end(), {"", "", "", ""});
      status_line = std::string("error: ") + e.what();
    }
    row.push_back(point_dir);
    table.text_row(row);
    std::cout << axis << " = " << value << ": " << status_line << "\n";
  }
  std::cout << "sweep table: " << run_dir << "/sweep.csv\n";
  return 0;
}

int cmd_encoding(const std::vector<std::size_t>& axes, const std::string& grid_kind,
                 std::size_t bands, std::vector<double> max_resolution, bool log_spacing,
                 bool no_raw, const std::string& out_path) {
  if (axes.empty()) throw config_error("encoding: --axes is required");
  PositionGrid grid = [&] {
    if (grid_kind == "endpoint") return PositionGrid::endpoint(axes);
    if (grid_kind == "centers") return PositionGrid::centers(axes);
    throw config_error("encoding: --grid must be 'endpoint' or 'centers', got '" + grid_kind +
                       "'");
  }();

  FourierConfig fc;
  fc.num_bands = bands;
  fc.log_spacing = log_spacing;
  fc.concat_raw_position = !no_raw;
  if (max_resolution.empty())
    for (std::size_t n : axes) max_resolution.push_back(static_cast<double>(n));
  fc.max_resolution = std::move(max_resolution);

  const Tensor<double> features = fourier_features<double>(grid, fc);
  io::write_matrix_csv(out_path, features.data(), features.rows(), features.cols());
  std::cout << "wrote " << features.rows() << " x " << features.cols() << " encoding to "
            << out_path << "\n";
  return 0;
}

}  // namespace

// ---- config-section parsers -------------------------------------------------------

PerceiverConfig model_from_config(io::ConfigMap& cfg) {
  PerceiverConfig m;
  m.input_channels = cfg.get_size("model.input_channels", 0);
  m.num_classes = cfg.get_size("model.num_classes", 0);
  m.latent_count = cfg.get_size("model.latent_count", m.latent_count);
  m.latent_dim = cfg.get_size("model.latent_dim", m.latent_dim);
  m.num_cross_attends = cfg.get_size("model.num_cross_attends", m.num_cross_attends);
  m.blocks_per_cross = cfg.get_size("model.blocks_per_cross", m.blocks_per_cross);
  m.self_attends_per_block =
      cfg.get_size("model.self_attends_per_block", m.self_attends_per_block);
  m.cross_heads = cfg.get_size("model.cross_heads", m.cross_heads);
  m.latent_heads = cfg.get_size("model.latent_heads", m.latent_heads);
  m.qk_channels = cfg.get_size("model.qk_channels", m.qk_channels);
  m.dense_widening = cfg.get_double("model.dense_widening", m.dense_widening);
  m.latent_init_scale = cfg.get_double("model.latent_init_scale", m.latent_init_scale);
  m.share_cross_after_first =
      cfg.get_bool("model.share_cross_after_first", m.share_cross_after_first);
  m.tower_sharing = parse_sharing(cfg.get_string("model.tower_sharing", "shared"));
  m.arrangement = parse_arrangement(cfg.get_string("model.arrangement", "interleaved"));
  m.loss_mode = parse_loss(cfg.get_string("model.loss_mode", "softmax"));
  return m;  // validated where used; 0 channels/classes may still be inferred
}

accounting::TransformerConfig baseline_from_config(io::ConfigMap& cfg) {
  accounting::TransformerConfig b;
  b.channels = cfg.get_size("baseline.channels", b.channels);
  b.heads = cfg.get_size("baseline.heads", b.heads);
  b.blocks = cfg.get_size("baseline.blocks", b.blocks);
  b.num_classes = cfg.get_size("baseline.num_classes", b.num_classes);
  b.dense_widening = cfg.get_double("baseline.dense_widening", b.dense_widening);
  return b;
}

DatasetSpec dataset_from_config(io::ConfigMap& cfg) {
  DatasetSpec d;
  d.kind = cfg.get_string("dataset.kind", d.kind);
  d.path = cfg.get_string("dataset.path", d.path);
  d.train_examples = cfg.get_size("dataset.train_examples", d.train_examples);
  d.test_examples = cfg.get_size("dataset.test_examples", d.test_examples);
  d.seed = cfg.get_size("dataset.seed", d.seed);
  d.num_bands = cfg.get_size("dataset.num_bands", d.num_bands);
  d.max_resolution = cfg.get_double("dataset.max_resolution", d.max_resolution);
  return d;
}

TrainSettings train_from_config(io::ConfigMap& cfg) {
  TrainSettings t;
  t.options.steps = cfg.get_size("train.steps", t.options.steps);
  t.options.batch_size = cfg.get_size("train.batch_size", t.options.batch_size);
  t.options.seed = cfg.get_size("train.seed", t.options.seed);
  t.options.checkpoint_every = cfg.get_size("train.checkpoint_every", 0);
  t.options.modality_dropout_p = cfg.get_double("train.video_dropout_p", 0.0);
  t.options.dropout_modality =
      cfg.get_string("train.dropout_modality", t.options.dropout_modality);
  t.base_lr = cfg.get_double("train.base_lr", t.base_lr);
  t.decay_factor = cfg.get_double("train.decay_factor", t.decay_factor);
  t.decay_epochs = cfg.get_size_list("train.decay_epochs", t.decay_epochs);
  t.steps_per_epoch = cfg.get_size("train.steps_per_epoch", t.steps_per_epoch);
  t.model_seed = cfg.get_size("train.model_seed", t.model_seed);
  t.weight_decay = cfg.get_double("train.weight_decay", t.weight_decay);
  return t;
}

io::ConfigMap resolved_config(const PerceiverConfig& model, const DatasetSpec& dataset,
                              const TrainSettings& train) {
  io::ConfigMap out;
  out.set("model.input_channels", std::to_string(model.input_channels));
  out.set("model.num_classes", std::to_string(model.num_classes));
  out.set("model.latent_count", std::to_string(model.latent_count));
  out.set("model.latent_dim", std::to_string(model.latent_dim));
  out.set("model.num_cross_attends", std::to_string(model.num_cross_attends));
  out.set("model.blocks_per_cross", std::to_string(model.blocks_per_cross));
  out.set("model.self_attends_per_block", std::to_string(model.self_attends_per_block));
  out.set("model.cross_heads", std::to_string(model.cross_heads));
  out.set("model.latent_heads", std::to_string(model.latent_heads));
  out.set("model.qk_channels", std::to_string(model.qk_channels));
  out.set("model.dense_widening", io::format_number(model.dense_widening));
  out.set("model.latent_init_scale", io::format_number(model.latent_init_scale));
  out.set("model.share_cross_after_first", model.share_cross_after_first ? "true" : "false");
  out.set("model.tower_sharing", sharing_name(model.tower_sharing));
  out.set("model.arrangement", arrangement_name(model.arrangement));
  out.set("model.loss_mode", loss_name(model.loss_mode));

  out.set("dataset.kind", dataset.kind);
  if (!dataset.path.empty()) out.set("dataset.path", dataset.path);
  out.set("dataset.train_examples", std::to_string(dataset.train_examples));
  out.set("dataset.test_examples", std::to_string(dataset.test_examples));
  out.set("dataset.seed", std::to_string(dataset.seed));
  if (dataset.num_bands != 0) out.set("dataset.num_bands", std::to_string(dataset.num_bands));
  if (dataset.max_resolution > 0.0)
    out.set("dataset.max_resolution", io::format_number(dataset.max_resolution));

  out.set("train.steps", std::to_string(train.options.steps));
  out.set("train.batch_size", std::to_string(train.options.batch_size));
  out.set("train.seed", std::to_string(train.options.seed));
  out.set("train.model_seed", std::to_string(train.model_seed));
  out.set("train.checkpoint_every", std::to_string(train.options.checkpoint_every));
  out.set("train.video_dropout_p", io::format_number(train.options.modality_dropout_p));
  out.set("train.dropout_modality", train.options.dropout_modality);
  out.set("train.base_lr", io::format_number(train.base_lr));
  out.set("train.decay_factor", io::format_number(train.decay_factor));
  out.set("train.decay_epochs", join_sizes(train.decay_epochs));
  out.set("train.steps_per_epoch", std::to_string(train.steps_per_epoch));
  out.set("train.weight_decay", io::format_number(train.weight_decay));
  return out;
}

// ---- CLI wiring --------------------------------------------------------------------

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"byte-array attention model: training, accounting and analysis tools"};
  app.require_subcommand(1);
  int code = 0;

  struct Common {
    std::string config;
    std::vector<std::string> sets;
  };
  auto add_common = [](CLI::App* sub, Common& c) {
    sub->add_option("-c,--config", c.config, "key = value configuration file");
    sub->add_option("-s,--set", c.sets, "override KEY=VALUE (repeatable)");
  };

  Common train_c;
  std::string train_dir = "runs/train";
  CLI::App* train_cmd =
      app.add_subcommand("train", "train a model, log metrics, write checkpoints");
  add_common(train_cmd, train_c);
  train_cmd->add_option("-o,--run-dir", train_dir, "output directory");
  train_cmd->callback([&] { code = cmd_train(train_c.config, train_c.sets, train_dir); });

  Common count_c;
  std::size_t count_rows = 0;
  std::string count_out;
  CLI::App* count_cmd =
      app.add_subcommand("count", "analytic parameter and flop accounting");
  add_common(count_cmd, count_c);
  count_cmd->add_option("--rows", count_rows, "byte rows M (overrides count.byte_rows)");
  count_cmd->add_option("-o,--out", count_out, "write the per-layer breakdown CSV here");
  count_cmd->callback(
      [&] { code = cmd_count(count_c.config, count_c.sets, count_rows, count_out); });

  Common bench_c;
  std::vector<std::size_t> bench_rows;
  std::size_t bench_runs = 5;
  bool bench_no_wall = false;
  std::string bench_out;
  CLI::App* bench_cmd = app.add_subcommand(
      "bench", "analytic flops plus measured forward wall time across byte-row counts");
  add_common(bench_cmd, bench_c);
  bench_cmd->add_option("--rows", bench_rows, "byte-row counts (overrides bench.rows)");
  bench_cmd->add_option("--runs", bench_runs, "forward passes per row count (median taken)");
  bench_cmd->add_flag("--no-wall", bench_no_wall, "skip wall-time measurement");
  bench_cmd->add_option("-o,--out", bench_out, "also write the CSV here");
  bench_cmd->callback([&] {
    code = cmd_bench(bench_c.config, bench_c.sets, bench_rows, bench_runs, bench_no_wall,
                     bench_out);
  });

  Common perm_c;
  std::size_t perm_inputs = 50, perm_rows = 256;
  std::uint64_t perm_seed = 99;
  std::string perm_out;
  CLI::App* perm_cmd = app.add_subcommand(
      "permute-eval", "compare logits before/after permuting byte rows (with conv probe)");
  add_common(perm_cmd, perm_c);
  perm_cmd->add_option("--inputs", perm_inputs, "number of random inputs");
  perm_cmd->add_option("--rows", perm_rows, "byte rows per input");
  perm_cmd->add_option("--seed", perm_seed, "rng seed for inputs and the permutation");
  perm_cmd->add_option("-o,--out", perm_out, "write per-input differences CSV here");
  perm_cmd->callback([&] {
    code = cmd_permute_eval(perm_c.config, perm_c.sets, perm_inputs, perm_rows, perm_seed,
                            perm_out);
  });

  Common att_c;
  std::string att_checkpoint, att_dir = "runs/attmaps";
  std::vector<std::size_t> att_latents = {0};
  long long att_sel = -1;
  CLI::App* att_cmd = app.add_subcommand(
      "attmaps", "dump cross-attention score maps as CSV (and PGM for 2-D grids)");
  add_common(att_cmd, att_c);
  att_cmd->add_option("--checkpoint", att_checkpoint, "load weights from this checkpoint");
  att_cmd->add_option("-o,--out-dir", att_dir, "output directory");
  att_cmd->add_option("--latents", att_latents, "latent indices to render as PGM");
  att_cmd->add_option("--attend", att_sel, "cross-attend index (default: all)");
  att_cmd->callback([&] {
    code = cmd_attmaps(att_c.config, att_c.sets, att_checkpoint, att_dir, att_latents,
                       att_sel);
  });

  Common sweep_c;
  std::string sweep_axis, sweep_dir = "runs/sweep";
  std::vector<std::string> sweep_values;
  CLI::App* sweep_cmd = app.add_subcommand(
      "sweep", "train once per value of one config key; failures are recorded, not fatal");
  add_common(sweep_cmd, sweep_c);
  sweep_cmd->add_option("--axis", sweep_axis, "config key to vary")->required();
  sweep_cmd->add_option("--values", sweep_values, "values to try")->required();
  sweep_cmd->add_option("-o,--run-dir", sweep_dir, "output directory");
  sweep_cmd->callback([&] {
    code = cmd_sweep(sweep_c.config, sweep_c.sets, sweep_axis, sweep_values, sweep_dir);
  });

  std::vector<std::size_t> enc_axes;
  std::string enc_grid = "endpoint", enc_out = "encoding.csv";
  std::size_t enc_bands = 4;
  std::vector<double> enc_max;
  bool enc_log = false, enc_no_raw = false;
  CLI::App* enc_cmd =
      app.add_subcommand("encoding", "dump a Fourier position-encoding matrix as CSV");
  enc_cmd->add_option("--axes", enc_axes, "grid shape, e.g. --axes 28 28")->required();
  enc_cmd->add_option("--grid", enc_grid, "endpoint | centers");
  enc_cmd->add_option("--bands", enc_bands, "frequency bands per dimension");
  enc_cmd->add_option("--max-resolution", enc_max,
                      "sampling resolution per dimension (default: the axis sizes)");
  enc_cmd->add_flag("--log-spacing", enc_log, "geometric band spacing");
  enc_cmd->add_flag("--no-raw", enc_no_raw, "omit the raw coordinate channels");
  enc_cmd->add_option("-o,--out", enc_out, "output CSV path");
  enc_cmd->callback([&] {
    code = cmd_encoding(enc_axes, enc_grid, enc_bands, enc_max, enc_log, enc_no_raw, enc_out);
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;  // bad usage is a configuration error; --help is not
  } catch (const config_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return code;
}

}  // namespace perceiver::cli
