#include "cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

#include "fenplan/checksum.hpp"
#include "fenplan/cost_model.hpp"
#include "fenplan/dataset.hpp"
#include "fenplan/error.hpp"
#include "fenplan/planner.hpp"
#include "fenplan/representations.hpp"
#include "fenplan/scoring.hpp"
#include "fenplan/serialize.hpp"
#include "fenplan/synthetic.hpp"

namespace fenplan::cli {

namespace fs = std::filesystem;

namespace {

constexpr const char* kCacheEnv = "PRIVYNET_CACHE_DIR";

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) parts.push_back(cur);
  if (!s.empty() && s.back() == sep) parts.emplace_back();
  return parts;
}

std::size_t parse_size(const std::string& s, const std::string& what) {
  std::size_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) throw ConfigError("bad " + what + ": '" + s + "'");
  return v;
}

// planted[:seed[:n_train:n_test]], blobs[:seed[:n_train:n_test]],
// cifar10:DIR[:n_train:n_test]
LabeledDataset load_dataset(const std::string& spec) {
  const auto parts = split(spec, ':');
  const std::string& kind = parts.front();
  if (kind == "planted" || kind == "blobs") {
    if (parts.size() != 1 && parts.size() != 2 && parts.size() != 4) {
      throw ConfigError("dataset spec '" + spec + "' should be " + kind + "[:seed[:n_train:n_test]]");
    }
    const std::uint64_t seed = parts.size() >= 2 ? parse_size(parts[1], "dataset seed") : 1;
    if (kind == "planted") {
      PlantedSpec p;
      p.seed = seed;
      if (parts.size() == 4) {
        p.n_train = parse_size(parts[2], "n_train");
        p.n_test = parse_size(parts[3], "n_test");
      }
      return make_planted_dataset(p);
    }
    BlobSpec b;
    b.seed = seed;
    if (parts.size() == 4) {
      b.n_train = parse_size(parts[2], "n_train");
      b.n_test = parse_size(parts[3], "n_test");
    }
    return make_blob_dataset(b);
  }
  if (kind == "cifar10") {
    if (parts.size() != 2 && parts.size() != 4) {
      throw ConfigError("dataset spec '" + spec + "' should be cifar10:DIR[:n_train:n_test]");
    }
    if (parts.size() == 4) {
      return load_cifar10_dir(parts[1], parse_size(parts[2], "n_train"), parse_size(parts[3], "n_test"));
    }
    return load_cifar10_dir(parts[1]);
  }
  throw ConfigError("unknown dataset kind '" + kind + "' (expected planted, blobs or cifar10)");
}

struct EvalFlags {
  std::size_t epochs = 60;
  double rate = 0.5;
  std::size_t batch = 32;
  std::size_t hidden = 0;
  double lambda_rel = 1e-3;
  double peak = 1.0;
  double cap = 60.0;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--epochs", epochs, "Classifier epochs")->capture_default_str();
    cmd->add_option("--rate", rate, "Classifier initial learning rate")->capture_default_str();
    cmd->add_option("--batch-size", batch, "Classifier mini-batch size")->capture_default_str();
    cmd->add_option("--hidden", hidden, "Classifier hidden units (0 = linear)")->capture_default_str();
    cmd->add_option("--lambda-rel", lambda_rel, "Reconstructor ridge, relative to the mean Gram diagonal")
        ->capture_default_str();
    cmd->add_option("--peak", peak, "PSNR peak pixel value")->capture_default_str();
    cmd->add_option("--psnr-cap", cap, "PSNR ceiling in dB")->capture_default_str();
  }

  EvalHyper hyper() const {
    EvalHyper h;
    h.classifier.epochs = epochs;
    h.classifier.rate = rate;
    h.classifier.batch = batch;
    h.classifier.hidden = hidden;
    h.recon_lambda_rel = lambda_rel;
    h.psnr.peak = peak;
    h.psnr.cap_db = cap;
    return h;
  }
};

ScatterWeighting parse_weighting(const std::string& s) {
  if (s == "unweighted") return ScatterWeighting::unweighted;
  if (s == "class_size") return ScatterWeighting::class_size;
  throw ConfigError("unknown weighting '" + s + "' (expected unweighted or class_size)");
}

// Provenance record written next to every primary output. Timestamps live
// only here, so primary outputs stay byte-reproducible.
class RunManifest {
 public:
  RunManifest(std::string command, const std::vector<std::string>& args)
      : command_(std::move(command)), args_(args), start_(std::chrono::steady_clock::now()) {}

  void input(const fs::path& path) { inputs_.push_back(path); }
  void output(const fs::path& path) { outputs_.push_back(path); }
  void seed(const std::string& name, std::uint64_t value) { seeds_[name] = value; }

  void write(const fs::path& primary) const {
    Json inputs = Json::array();
    for (const auto& p : inputs_) inputs.push_back(Json{{"path", p.string()}, {"checksum", to_hex(file_checksum(p))}});
    Json outputs = Json::array();
    for (const auto& p : outputs_) outputs.push_back(Json{{"path", p.string()}, {"checksum", to_hex(file_checksum(p))}});
    std::string joined;
    for (const auto& a : args_) joined += a + '\x1f';
    const auto elapsed = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start_);
    const std::time_t now = std::time(nullptr);
    char stamp[32];
    std::strftime(stamp, sizeof(stamp), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    Json j{{"command", command_},
           {"arguments", args_},
           {"config_hash", to_hex(fnv1a64(joined))},
           {"seeds", seeds_},
           {"tool_version", FENPLAN_VERSION},
           {"inputs", std::move(inputs)},
           {"outputs", std::move(outputs)},
           {"finished_utc", stamp},
           {"wall_clock_ms", elapsed.count()}};
    write_file(manifest_path(primary), dump_json(j));
  }

  static fs::path manifest_path(const fs::path& primary) { return fs::path(primary.string() + ".manifest.json"); }

 private:
  std::string command_;
  std::vector<std::string> args_;
  std::chrono::steady_clock::time_point start_;
  std::vector<fs::path> inputs_;
  std::vector<fs::path> outputs_;
  Json seeds_ = Json::object();
};

std::vector<std::size_t> all_m(const PretrainedNet& net) {
  std::vector<std::size_t> ms(net.conv_count());
  for (std::size_t i = 0; i < ms.size(); ++i) ms[i] = i + 1;
  return ms;
}

std::pair<std::size_t, std::size_t> parse_range(const std::string& s, std::size_t max_m) {
  if (s.empty()) return {max_m, max_m};
  const auto dash = s.find('-');
  if (dash == std::string::npos) {
    const auto m = parse_size(s, "m range");
    return {m, m};
  }
  return {parse_size(s.substr(0, dash), "m range"), parse_size(s.substr(dash + 1), "m range")};
}

CharacterizationTable load_table(const fs::path& path) { return table_from_json(parse_json(read_file(path))); }

void check_table(const CharacterizationTable& table, const PretrainedNet& net, const LabeledDataset& data,
                 std::ostream& err) {
  if (table.provenance.net_checksum != net_checksum(net)) {
    throw ConfigError("characterization table was built for a different net (" + table.provenance.net_name + ")");
  }
  if (table.provenance.dataset_id != data.id) {
    err << "warning: table was characterized on '" << table.provenance.dataset_id << "', planning on '" << data.id
        << "'\n";
  }
}


// Looks the table up in PRIVYNET_CACHE_DIR when set, otherwise characterizes
// and stores the result there.
CharacterizationTable characterize_cached(const PretrainedNet& net, const LabeledDataset& data,
                                          const CharacterizeOptions& opts, std::ostream& err) {
  std::optional<CharacterizationTable> table;
  const char* cache_dir = std::getenv(kCacheEnv);
  const std::uint64_t key = cache_key(net_checksum(net), data.id, characterization_hash(opts));
  if (cache_dir && *cache_dir) {
    table = load_cached_table(cache_dir, key);
    err << (table ? "cache hit: " : "cache miss: ") << cache_path(cache_dir, key).string() << "\n";
  }
  if (!table) {
    table = characterize_grid(net, data, opts);
    if (cache_dir && *cache_dir) store_cached_table(cache_dir, key, *table);
  }
  for (const auto& w : table->warnings) err << "warning: " << w << "\n";
  return *table;
}

// Powers of two up to the widest conv layer, plus that width.
std::vector<std::size_t> default_d_list(const PretrainedNet& net) {
  const auto widths = net.conv_widths();
  const std::size_t widest = *std::max_element(widths.begin(), widths.end());
  std::vector<std::size_t> ds;
  for (std::size_t d = 1; d < widest; d *= 2) ds.push_back(d);
  ds.push_back(widest);
  return ds;
}
}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Plan and characterize feature-extraction networks cut from pre-trained CNNs", "fenplan"};
  app.set_version_flag("--version", FENPLAN_VERSION);
  app.require_subcommand(1);

  std::string net_path, dataset_spec, out_path, table_path, constraints_path, config_path, config_out, json_out;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  EvalFlags eval;

  // profile
  auto* profile = app.add_subcommand("profile", "Per-layer MACs, parameters, bytes and forward latency");
  std::string m_range;
  ProfileOptions popts;
  profile->add_option("--net", net_path, "Net manifest (JSON)")->required();
  profile->add_option("--m-range", m_range, "Layer counts, e.g. 1-4 (default: full depth)");
  profile->add_option("--batch", popts.batch, "Images per timed forward pass")->capture_default_str();
  profile->add_option("--reps", popts.repetitions, "Timed repetitions (0 disables timing)")->capture_default_str();
  profile->add_option("--seed", seed, "Seed for the random input batch")->capture_default_str();
  profile->add_option("--out", out_path, "Output CSV")->required();

  // characterize
  auto* characterize = app.add_subcommand("characterize", "Utility/PSNR table over (m, D') and per channel");
  std::vector<std::size_t> m_list, d_list;
  std::size_t seeds_per_cell = 1;
  bool per_channel = false;
  characterize->add_option("--net", net_path, "Net manifest (JSON)")->required();
  characterize->add_option("--dataset", dataset_spec, "planted[:seed[:n_train:n_test]], blobs[...] or cifar10:DIR[...]")
      ->required();
  characterize->add_option("--m-list", m_list, "Layer counts (default: all)")->delimiter(',');
  characterize->add_option("--d-list", d_list, "Output depths")->delimiter(',')->required();
  characterize->add_option("--seeds", seeds_per_cell, "Random subsets per cell")->capture_default_str();
  characterize->add_flag("--per-channel", per_channel, "Also evaluate every channel alone at each m");
  characterize->add_option("--seed", seed, "Base seed")->capture_default_str();
  characterize->add_option("--threads", threads, "Worker threads")->capture_default_str();
  characterize->add_option("--out", out_path, "Output table JSON")->required();
  eval.add_to(characterize);

  // score
  auto* score = app.add_subcommand("score", "Score the output channels at layer m");
  std::size_t m = 1;
  std::string criterion = "fisher_lda", weighting = "unweighted";
  score->add_option("--net", net_path, "Net manifest (JSON)")->required();
  score->add_option("--dataset", dataset_spec, "Dataset spec (train split is scored)")->required();
  score->add_option("--m", m, "Layer count")->required();
  score->add_option("--criterion", criterion, "fisher_lda, wgt_fro, rep_mm, rep_ms or rep_mf")->capture_default_str();
  score->add_option("--weighting", weighting, "Between-class scatter: unweighted or class_size")->capture_default_str();
  score->add_option("--threads", threads, "Worker threads")->capture_default_str();
  score->add_option("--out", out_path, "Output CSV")->required();

  // plan
  auto* plan_cmd = app.add_subcommand("plan", "Choose a topology and channel subset under constraints");
  PlanOptions plan_opts;
  std::size_t d_override = 0;
  plan_cmd->add_option("--net", net_path, "Net manifest (JSON)")->required();
  plan_cmd->add_option("--dataset", dataset_spec, "Dataset spec (train split feeds the Fisher scores)")->required();
  bool characterize_on_miss = false;
  plan_cmd->add_option("--table", table_path, "Characterization table JSON");
  plan_cmd->add_flag("--characterize-on-miss", characterize_on_miss,
                     "Characterize every m when the table is absent or has no feasible cell");
  plan_cmd->add_option("--d-list", d_list, "Output depths for --characterize-on-miss (default: powers of two)")
      ->delimiter(',');
  eval.add_to(plan_cmd);
  plan_cmd->add_option("--constraints", constraints_path, "Constraints JSON")->required();
  plan_cmd->add_option("--prune-utility", plan_opts.n_prune_utility, "Channels pruned by Fisher score")
      ->capture_default_str();
  plan_cmd->add_option("--prune-privacy", plan_opts.n_prune_privacy, "Channels pruned by per-channel PSNR")
      ->capture_default_str();
  plan_cmd->add_option("--d-prime", d_override, "Override the chosen output depth");
  plan_cmd->add_option("--weighting", weighting, "Between-class scatter: unweighted or class_size")
      ->capture_default_str();
  plan_cmd->add_option("--seed", seed, "Selection seed")->capture_default_str();
  plan_cmd->add_option("--threads", threads, "Worker threads")->capture_default_str();
  plan_cmd->add_option("--out", out_path, "Output plan JSON")->required();
  plan_cmd->add_option("--config-out", config_out, "Output FEN config JSON (default: fen_config.json beside --out)");

  // extract
  auto* extract = app.add_subcommand("extract", "Write released representations for a dataset split");
  std::string split_name = "test";
  extract->add_option("--net", net_path, "Net manifest (JSON)")->required();
  extract->add_option("--config", config_path, "FEN config JSON")->required();
  extract->add_option("--dataset", dataset_spec, "Dataset spec")->required();
  extract->add_option("--split", split_name, "train or test")->capture_default_str();
  extract->add_option("--out", out_path, "Output representations file")->required();

  // compare-settings
  auto* compare = app.add_subcommand("compare-settings", "Random vs characterization vs LDA pruning");
  CompareOptions copts;
  compare->add_option("--net", net_path, "Net manifest (JSON)")->required();
  compare->add_option("--dataset", dataset_spec, "Dataset spec")->required();
  compare->add_option("--table", table_path, "Table with per-channel entries at m (default: characterize now)");
  compare->add_option("--m", copts.m, "Layer count")->required();
  compare->add_option("--d-prime", copts.d_prime, "Output depth")->required();
  compare->add_option("--prune-utility", copts.n_prune_utility, "Channels pruned for utility")->capture_default_str();
  compare->add_option("--prune-privacy", copts.n_prune_privacy, "Channels pruned for privacy")->capture_default_str();
  compare->add_option("--trials", copts.n_trials, "Random selections per setting")->capture_default_str();
  compare->add_option("--weighting", weighting, "Between-class scatter: unweighted or class_size")
      ->capture_default_str();
  compare->add_option("--seed", seed, "Base seed")->capture_default_str();
  compare->add_option("--threads", threads, "Worker threads")->capture_default_str();
  compare->add_option("--out", out_path, "Output CSV")->required();
  compare->add_option("--json-out", json_out, "Also write the full report as JSON");
  eval.add_to(compare);

  // gen-net
  auto* gen_net = app.add_subcommand("gen-net", "Write a synthetic net (toy or planted) as manifest + blob");
  std::string kind = "toy";
  ToyNetSpec toy;
  std::size_t side = 8;
  gen_net->add_option("--kind", kind, "toy or planted")->capture_default_str();
  gen_net->add_option("--widths", toy.widths, "Toy conv widths")->delimiter(',');
  gen_net->add_option("--pool-after", toy.pool_after, "Toy conv ordinals followed by a 2x2 max-pool")->delimiter(',');
  gen_net->add_option("--input", side, "Input side length")->capture_default_str();
  gen_net->add_option("--seed", seed, "Weight seed")->capture_default_str();
  gen_net->add_option("--out", out_path, "Output manifest JSON")->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }

  try {
    const fs::path out_file = out_path;
    RunManifest manifest(app.get_subcommands().front()->get_name(), args);
    manifest.seed("seed", seed);

    if (*profile) {
      const PretrainedNet net = load_netspec(net_path);
      manifest.input(net_path);
      const auto [lo, hi] = parse_range(m_range, net.conv_count());
      if (lo < 1 || hi > net.conv_count() || lo > hi) {
        throw ConfigError("--m-range must lie within [1, " + std::to_string(net.conv_count()) + "]");
      }
      popts.seed = seed;
      std::vector<ProfileRow> rows;
      for (std::size_t mm = lo; mm <= hi; ++mm) {
        const auto r = profile_rows(mm, profile_latency(truncate(net, mm), popts));
        rows.insert(rows.end(), r.begin(), r.end());
      }
      write_file(out_file, profile_to_csv(rows));
    } else if (*characterize) {
      const PretrainedNet net = load_netspec(net_path);
      manifest.input(net_path);
      const LabeledDataset data = load_dataset(dataset_spec);
      CharacterizeOptions opts;
      opts.m_list = m_list.empty() ? all_m(net) : m_list;
      opts.d_list = d_list;
      opts.seeds_per_cell = seeds_per_cell;
      if (per_channel) opts.per_channel_m = opts.m_list;
      opts.seed = seed;
      opts.hyper = eval.hyper();
      opts.threads = threads;

      const CharacterizationTable table = characterize_cached(net, data, opts, err);
      write_file(out_file, dump_json(to_json(table)));
    } else if (*score) {
      const PretrainedNet net = load_netspec(net_path);
      manifest.input(net_path);
      const LabeledDataset data = load_dataset(dataset_spec);
      const Fen fen = truncate(net, m);
      const Criterion c = parse_criterion(criterion);
      const FilterBank* filters = nullptr;
      for (const auto& l : fen.layers())
        if (l.is_conv()) filters = &l.filters;
      const auto scores = score_channels(fen.forward(data.train.images), data.train.labels, c, filters,
                                         parse_weighting(weighting), threads);
      write_file(out_file, scores_to_csv(scores));
    } else if (*plan_cmd) {
      const PretrainedNet net = load_netspec(net_path);
      manifest.input(net_path);
      manifest.input(constraints_path);
      const LabeledDataset data = load_dataset(dataset_spec);
      const ConstraintSet constraints = constraints_from_json(parse_json(read_file(constraints_path)));
      plan_opts.seed = seed;
      plan_opts.threads = threads;
      plan_opts.weighting = parse_weighting(weighting);
      if (d_override > 0) plan_opts.d_prime = d_override;
      if (table_path.empty() && !characterize_on_miss) throw ConfigError("plan needs --table or --characterize-on-miss");

      std::optional<CharacterizationTable> table;
      if (!table_path.empty()) {
        manifest.input(table_path);
        table = load_table(table_path);
        check_table(*table, net, data, err);
      }
      bool miss = !table;
      if (table && characterize_on_miss) {
        try {
          choose_topology(*table, constraints);
        } catch (const InfeasibleError&) {
          miss = true;
        }
      }
      if (miss) {
        CharacterizeOptions co;
        co.m_list = all_m(net);
        co.d_list = d_list.empty() ? default_d_list(net) : d_list;
        if (plan_opts.n_prune_privacy > 0) co.per_channel_m = co.m_list;
        co.seed = seed;
        co.hyper = eval.hyper();
        co.threads = threads;
        err << "characterizing " << co.m_list.size() << " layer counts on '" << data.id << "'\n";
        table = characterize_cached(net, data, co, err);
        const fs::path table_file = out_file.string() + ".table.json";
        write_file(table_file, dump_json(to_json(*table)));
        manifest.output(table_file);
      }
      const Plan p = plan(net, data, *table, constraints, plan_opts);
      const fs::path cfg_file = config_out.empty() ? out_file.parent_path() / "fen_config.json" : fs::path(config_out);
      write_file(out_file, dump_json(to_json(p)));
      write_file(cfg_file, dump_json(to_json(p.config)));
      manifest.output(cfg_file);
      out << "chosen m=" << p.topology.m << " D'=" << p.topology.d_prime << " ("
          << (constraints.high_privacy() ? "high" : "low") << " privacy requirement)\n";
    } else if (*extract) {
      const PretrainedNet net = load_netspec(net_path);
      manifest.input(net_path);
      manifest.input(config_path);
      const FenConfig cfg = fen_config_from_json(parse_json(read_file(config_path)));
      const LabeledDataset data = load_dataset(dataset_spec);
      if (split_name != "train" && split_name != "test") throw ConfigError("--split must be train or test");
      const Split& s = split_name == "train" ? data.train : data.test;
      write_representations(out_file, derive_fen(net, cfg).forward(s.images), cfg.hash());
      const fs::path labels_file = out_file.string() + ".labels.csv";
      write_file(labels_file, labels_to_csv(s.labels));
      manifest.output(labels_file);
    } else if (*compare) {
      const PretrainedNet net = load_netspec(net_path);
      manifest.input(net_path);
      const LabeledDataset data = load_dataset(dataset_spec);
      copts.seed = seed;
      copts.hyper = eval.hyper();
      copts.weighting = parse_weighting(weighting);
      copts.threads = threads;
      CharacterizationTable table;
      if (!table_path.empty()) {
        manifest.input(table_path);
        table = load_table(table_path);
        check_table(table, net, data, err);
      } else {
        CharacterizeOptions co;
        co.per_channel_m = {copts.m};
        co.seed = seed;
        co.hyper = copts.hyper;
        co.threads = threads;
        table = characterize_grid(net, data, co);
      }
      const SettingsReport report = compare_settings(net, data, table, copts);
      write_file(out_file, settings_to_csv(report));
      if (!json_out.empty()) {
        write_file(json_out, dump_json(to_json(report)));
        manifest.output(json_out);
      }
    } else if (*gen_net) {
      PretrainedNet net;
      if (kind == "toy") {
        toy.seed = seed;
        toy.input.height = side;
        toy.input.width = side;
        net = make_toy_net(toy);
      } else if (kind == "planted") {
        net = make_planted_net(seed, side);
      } else {
        throw ConfigError("unknown net kind '" + kind + "' (expected toy or planted)");
      }
      save_netspec(net, out_file);
      fs::path blob = out_file;
      blob.replace_extension(".bin");
      manifest.output(blob);
    }
    manifest.output(out_file);
    manifest.write(out_file);
    return 0;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e);
  }
}

}  // namespace fenplan::cli
