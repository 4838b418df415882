// Command-line front end: embed, eval, diagnose, bench, gen-sbm.
#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <string>
#include <vector>

#include "sge/eval.hpp"
#include "sge/graph.hpp"
#include "sge/io.hpp"
#include "sge/objective.hpp"
#include "sge/sbm.hpp"
#include "sge/spectral.hpp"
#include "sge/update.hpp"

namespace {

namespace fs = std::filesystem;

double median_ns(std::vector<std::int64_t> values) {
  if (values.empty()) return 0;
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  if (n % 2 == 1) return static_cast<double>(values[n / 2]);
  return 0.5 * (static_cast<double>(values[n / 2 - 1]) +
                static_cast<double>(values[n / 2]));
}

sge::ExperimentConfig<double> experiment_config(const sge::RunConfig& cfg,
                                                bool incremental) {
  sge::ExperimentConfig<double> ecfg;
  ecfg.k = cfg.k;
  ecfg.train_fraction = cfg.train_fraction;
  ecfg.seed = cfg.seed;
  ecfg.depth = cfg.depth;
  ecfg.l2 = cfg.l2;
  ecfg.reorth_interval = cfg.reorth_interval;
  ecfg.incremental_influence = incremental;
  ecfg.eigs.dense_threshold = cfg.dense_threshold;
  return ecfg;
}

std::vector<sge::ArrivalEvent> load_events(const sge::RunConfig& cfg,
                                           sge::EdgeListData* data_out = nullptr) {
  if (cfg.edges.empty())
    throw std::invalid_argument("an edge list is required (--edges)");
  sge::EdgeListData data = sge::load_edgelist(cfg.edges);
  if (!data.integer_ids)
    std::cerr << "warning: edge list has non-integer vertex ids; arrival "
                 "order follows first appearance\n";
  sge::StreamPlan plan =
      sge::stream_from_edgelist(data.edges, data.vertex_count);
  if (data_out) *data_out = std::move(data);
  return std::move(plan.events);
}

fs::path prepare_out_dir(const sge::RunConfig& cfg) {
  const fs::path dir(cfg.out_dir);
  fs::create_directories(dir);
  return dir;
}

void write_stream_artifacts(const fs::path& dir, const sge::RunConfig& cfg,
                            const sge::ExperimentResult<double>& result) {
  sge::write_embedding_csv((dir / "embedding.csv").string(),
                           result.final_embedding);
  sge::write_embedding_csv((dir / "arrival_rows.csv").string(),
                           result.frozen_rows, result.prefix_size);
  sge::write_timings_csv((dir / "timings.csv").string(), result.steps,
                         result.prefix_size);
  sge::save_config((dir / "config_used.cfg").string(), cfg);
}

int run_embed(const sge::RunConfig& cfg, bool incremental) {
  const auto events = load_events(cfg);
  const auto result =
      sge::run_stream(events, experiment_config(cfg, incremental));
  const fs::path dir = prepare_out_dir(cfg);
  write_stream_artifacts(dir, cfg, result);

  std::cout << "embedded " << result.report.vertex_count
            << " vertices (prefix " << result.report.prefix_size
            << ", arrivals " << result.report.arrivals
            << ") -> " << dir.string() << "\n"
            << "orthogonality residual "
            << sge::format_double(
                   sge::orthogonality_residual(result.final_embedding))
            << "\n";
  return 0;
}

int run_eval(const sge::RunConfig& cfg, bool incremental) {
  if (cfg.labels.empty())
    throw std::invalid_argument("a label file is required (--labels)");
  sge::EdgeListData data;
  const auto events = load_events(cfg, &data);
  const sge::LabeledDataset labels = sge::load_labels(cfg.labels, data);

  const auto result = sge::run_streaming_experiment(
      events, labels, experiment_config(cfg, incremental));
  const fs::path dir = prepare_out_dir(cfg);
  write_stream_artifacts(dir, cfg, result);
  sge::write_report_json((dir / "report.json").string(), result.report,
                         sge::config_echo(cfg));

  std::cout << "evaluated " << result.report.vertex_count << " vertices -> "
            << dir.string() << "\n";
  if (result.report.micro_f1)
    std::cout << "micro_f1 " << sge::format_double(*result.report.micro_f1)
              << " macro_f1 " << sge::format_double(*result.report.macro_f1)
              << "\n";
  else
    std::cout << "classification skipped (no held-out arrivals)\n";
  std::cout << "nmi " << sge::format_double(result.report.nmi)
            << " completeness "
            << sge::format_double(result.report.completeness) << "\n";
  return 0;
}

int run_diagnose(const sge::RunConfig& cfg, int seed_count) {
  if (seed_count < 1)
    throw std::invalid_argument("diagnose needs at least one seed");
  const auto events = load_events(cfg);
  const auto n = static_cast<Eigen::Index>(events.size());
  const auto prefix = static_cast<Eigen::Index>(
      std::ceil(cfg.train_fraction * static_cast<double>(n)));
  if (prefix >= n)
    throw std::invalid_argument(
        "diagnose needs at least one post-prefix arrival");

  std::vector<std::uint64_t> seeds;
  seeds.reserve(static_cast<std::size_t>(seed_count));
  for (int s = 0; s < seed_count; ++s)
    seeds.push_back(sge::mix_seed(cfg.seed, 0xD1A6705E00000000ULL +
                                                static_cast<std::uint64_t>(s)));

  sge::EigsOptions eigs;
  eigs.dense_threshold = cfg.dense_threshold;
  const sge::DeviationReport report =
      sge::deviation_diagnostic<double>(events, prefix, cfg.k, seeds, cfg.depth,
                                     eigs);

  const fs::path dir = prepare_out_dir(cfg);
  sge::write_deviation_csv((dir / "deviation.csv").string(), report);
  sge::save_config((dir / "config_used.cfg").string(), cfg);

  std::int64_t ok_steps = 0;
  for (std::size_t i = 0; i < report.records.size();
       i += static_cast<std::size_t>(report.seeds))
    if (report.records[i].precondition_ok) ++ok_steps;
  std::cout << "steps " << report.steps << " seeds " << report.seeds
            << " within_bound_fraction "
            << sge::format_double(report.within_bound_fraction)
            << " precondition_fraction "
            << sge::format_double(
                   report.steps > 0
                       ? static_cast<double>(ok_steps) /
                             static_cast<double>(report.steps)
                       : 1.0)
            << "\n";
  return 0;
}

// Four equal planted blocks with an intra/inter ratio of 20, scaled to the
// requested mean degree.
sge::SbmSpec bench_spec(int size, double avg_degree, std::uint64_t seed) {
  const double ratio = 20.0;
  const double b = size / 4.0;
  const double p_out =
      avg_degree / (ratio * (b - 1) + (static_cast<double>(size) - b));
  sge::SbmSpec spec;
  spec.block_sizes = {size / 4, size / 4, size / 4, size - 3 * (size / 4)};
  spec.intra = std::min(1.0, ratio * p_out);
  spec.inter = p_out;
  spec.seed = seed;
  return spec;
}

int run_bench(const sge::RunConfig& cfg, const std::vector<int>& sizes,
              int arrivals, double avg_degree) {
  if (arrivals < 1) throw std::invalid_argument("arrivals must be >= 1");
  const fs::path dir = prepare_out_dir(cfg);
  std::ofstream out(dir / "bench.csv");
  if (!out) throw sge::IoError("cannot write bench.csv");
  out << "size,arrivals,median_influence_ns,median_update_ns,"
         "median_arrival_ns,retrain_ns\n";

  sge::EigsOptions eigs;
  eigs.dense_threshold = cfg.dense_threshold;

  for (const int size : sizes) {
    if (size <= arrivals + cfg.k)
      throw std::invalid_argument(
          "size " + std::to_string(size) +
          " leaves no room for the prefix (arrivals " +
          std::to_string(arrivals) + ", k " + std::to_string(cfg.k) + ")");
    const sge::SbmGraph sbm = sge::generate_sbm(bench_spec(
        size, avg_degree,
        sge::mix_seed(cfg.seed, 0xBE7C000000000000ULL +
                                    static_cast<std::uint64_t>(size))));
    const sge::StreamPlan plan =
        sge::stream_from_edgelist(sbm.edges, sbm.vertex_count);
    const auto prefix = static_cast<Eigen::Index>(size - arrivals);

    sge::DynGraph graph;
    for (Eigen::Index t = 0; t < prefix; ++t)
      apply_arrival(graph, plan.events[static_cast<std::size_t>(t)]);
    const Eigen::MatrixXd initial =
        sge::spectral_embed<double>(graph, cfg.k, eigs);

    sge::StreamState<double> state(
        std::move(graph), initial,
        sge::StreamConfig{cfg.depth, cfg.seed, cfg.reorth_interval, false});
    std::vector<std::int64_t> influence_ns, update_ns, arrival_ns;
    influence_ns.reserve(static_cast<std::size_t>(arrivals));
    update_ns.reserve(static_cast<std::size_t>(arrivals));
    arrival_ns.reserve(static_cast<std::size_t>(arrivals));
    for (Eigen::Index t = prefix; t < size; ++t) {
      const auto record =
          state.process_arrival(plan.events[static_cast<std::size_t>(t)]);
      influence_ns.push_back(record.influence_ns);
      update_ns.push_back(record.update_ns);
      arrival_ns.push_back(record.influence_ns + record.update_ns);
    }

    const auto t0 = std::chrono::steady_clock::now();
    const Eigen::MatrixXd retrained =
        sge::spectral_embed<double>(state.graph(), cfg.k, eigs);
    const auto t1 = std::chrono::steady_clock::now();
    const auto retrain =
        std::chrono::duration_cast<std::chrono::nanoseconds>(t1 - t0).count();

    out << size << "," << arrivals << ","
        << sge::format_double(median_ns(influence_ns)) << ","
        << sge::format_double(median_ns(update_ns)) << ","
        << sge::format_double(median_ns(arrival_ns)) << "," << retrain << "\n";
    std::cout << "size " << size << ": median per-arrival "
              << sge::format_double(median_ns(arrival_ns))
              << " ns (influence "
              << sge::format_double(median_ns(influence_ns)) << ", update "
              << sge::format_double(median_ns(update_ns)) << "), retrain "
              << retrain << " ns (rows " << retrained.rows() << ")\n";
  }
  if (!out) throw sge::IoError("failed writing bench.csv");
  return 0;
}

int run_gen_sbm(int blocks, int block_size, double intra, double inter,
                std::uint64_t seed, const std::string& edges_out,
                const std::string& labels_out) {
  sge::SbmSpec spec;
  spec.block_sizes.assign(static_cast<std::size_t>(blocks),
                          static_cast<sge::VertexId>(block_size));
  spec.intra = intra;
  spec.inter = inter;
  spec.seed = seed;
  const sge::SbmGraph sbm = sge::generate_sbm(spec);

  std::ofstream edges(edges_out);
  if (!edges) throw sge::IoError("cannot write edge list: " + edges_out);
  for (const auto& [u, v] : sbm.edges) edges << u << " " << v << "\n";
  if (!edges) throw sge::IoError("failed writing edge list: " + edges_out);

  std::ofstream labels(labels_out);
  if (!labels) throw sge::IoError("cannot write labels: " + labels_out);
  for (sge::VertexId v = 0; v < sbm.vertex_count; ++v)
    labels << v << " block" << sbm.labels[static_cast<std::size_t>(v)] << "\n";
  if (!labels) throw sge::IoError("failed writing labels: " + labels_out);

  std::cout << "generated " << sbm.vertex_count << " vertices, "
            << sbm.edges.size() << " edges, " << blocks << " blocks\n";
  return 0;
}

int guarded(const std::function<int()>& body) {
  try {
    return body();
  } catch (const sge::ConvergenceError& e) {
    std::cerr << "error: numerical: " << e.what() << "\n";
    return 3;
  } catch (const sge::IoError& e) {
    std::cerr << "error: data: " << e.what() << "\n";
    return 2;
  } catch (const sge::GraphError& e) {
    std::cerr << "error: data: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: data: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: internal: " << e.what() << "\n";
    return 4;
  }
}

void add_common_options(CLI::App* cmd, sge::RunConfig& cfg) {
  cmd->add_option("--edges", cfg.edges, "Edge list file (u v per line)");
  cmd->add_option("--k", cfg.k, "Embedding dimension")
      ->capture_default_str();
  cmd->add_option("--depth", cfg.depth, "Cascade depth per arrival")
      ->capture_default_str();
  cmd->add_option("--train-fraction", cfg.train_fraction,
                  "Prefix fraction embedded offline")
      ->capture_default_str();
  cmd->add_option("--seed", cfg.seed, "Global random seed")
      ->capture_default_str();
  cmd->add_option("--dense-threshold", cfg.dense_threshold,
                  "Largest graph order using the dense eigensolver")
      ->capture_default_str();
  cmd->add_option("--reorth-interval", cfg.reorth_interval,
                  "Re-orthonormalize every this many arrivals (0 = never)")
      ->capture_default_str();
  cmd->add_option("--l2", cfg.l2, "Classifier L2 strength")
      ->capture_default_str();
  cmd->add_option("--out-dir", cfg.out_dir, "Output directory")
      ->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  // The config file provides defaults; any explicit flag overrides it.
  std::string config_path;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--config" && i + 1 < argc)
      config_path = argv[i + 1];
    else if (arg.rfind("--config=", 0) == 0)
      config_path = arg.substr(9);
  }
  sge::RunConfig cfg;
  if (!config_path.empty()) {
    const int status = guarded([&] {
      cfg = sge::load_config(config_path);
      return 0;
    });
    if (status != 0) return status;
  }

  CLI::App app{"Streaming graph embedding via cascade-driven local updates"};
  app.fallthrough();
  app.require_subcommand(1);
  std::string config_echo_path = config_path;
  app.add_option("--config", config_echo_path,
                 "Key = value file with option defaults");

  bool incremental = false;

  CLI::App* embed = app.add_subcommand(
      "embed", "Stream an edge list and write the embedding");
  add_common_options(embed, cfg);
  embed->add_flag("--incremental", incremental,
                  "Reuse cached cascades beyond the first round");

  CLI::App* eval = app.add_subcommand(
      "eval", "Embed, classify held-out arrivals, cluster, report");
  add_common_options(eval, cfg);
  eval->add_option("--labels", cfg.labels, "Label file (vertex label per line)");
  eval->add_flag("--incremental", incremental,
                 "Reuse cached cascades beyond the first round");

  CLI::App* diagnose = app.add_subcommand(
      "diagnose", "Compare streamed updates against fresh retrains");
  add_common_options(diagnose, cfg);
  int seed_count = 10;
  diagnose->add_option("--seeds", seed_count, "Number of parallel cascade seeds")
      ->capture_default_str();

  CLI::App* bench = app.add_subcommand(
      "bench", "Per-arrival update cost across generated graph sizes");
  add_common_options(bench, cfg);
  std::vector<int> sizes{2000, 4000, 8000, 16000};
  int bench_arrivals = 500;
  double avg_degree = 10.0;
  bench->add_option("--sizes", sizes, "Graph sizes to benchmark")
      ->delimiter(',')
      ->capture_default_str();
  bench->add_option("--arrivals", bench_arrivals,
                    "Streamed arrivals per size")
      ->capture_default_str();
  bench->add_option("--avg-degree", avg_degree,
                    "Mean degree of the generated graphs")
      ->capture_default_str();

  CLI::App* gen = app.add_subcommand(
      "gen-sbm", "Write a planted-partition edge list and labels");
  int blocks = 4;
  int block_size = 250;
  double intra = 0.1;
  double inter = 0.005;
  std::uint64_t gen_seed = 1;
  std::string edges_out, labels_out;
  gen->add_option("--blocks", blocks, "Number of blocks")->capture_default_str();
  gen->add_option("--block-size", block_size, "Vertices per block")
      ->capture_default_str();
  gen->add_option("--intra", intra, "Within-block edge probability")
      ->capture_default_str();
  gen->add_option("--inter", inter, "Between-block edge probability")
      ->capture_default_str();
  gen->add_option("--seed", gen_seed, "Generator seed")->capture_default_str();
  gen->add_option("--edges-out", edges_out, "Edge list output path")
      ->required();
  gen->add_option("--labels-out", labels_out, "Labels output path")
      ->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: usage: " << e.what() << "\n";
    return 1;
  }

  if (embed->parsed()) return guarded([&] { return run_embed(cfg, incremental); });
  if (eval->parsed()) return guarded([&] { return run_eval(cfg, incremental); });
  if (diagnose->parsed())
    return guarded([&] { return run_diagnose(cfg, seed_count); });
  if (bench->parsed())
    return guarded([&] { return run_bench(cfg, sizes, bench_arrivals, avg_degree); });
  if (gen->parsed())
    return guarded([&] {
      return run_gen_sbm(blocks, block_size, intra, inter, gen_seed,
                         edges_out, labels_out);
    });
  return 1;
}
