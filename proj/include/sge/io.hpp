#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "sge/eval.hpp"
#include "sge/objective.hpp"
#include "sge/update.hpp"

namespace sge {

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Formats a double with 17 significant digits, enough to round-trip
// bit-exactly through text.
inline std::string format_double(double value) {
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), "%.17g", value);
  return buffer;
}

namespace detail {

inline std::vector<std::string> split_tokens(const std::string& line) {
  std::vector<std::string> tokens;
  std::istringstream stream(line);
  std::string token;
  while (stream >> token) tokens.push_back(token);
  return tokens;
}

inline bool is_comment_or_blank(const std::string& line) {
  for (const char c : line) {
    if (std::isspace(static_cast<unsigned char>(c))) continue;
    return c == '#';
  }
  return true;
}

inline std::optional<std::int64_t> parse_integer(const std::string& token) {
  if (token.empty()) return std::nullopt;
  std::size_t pos = 0;
  try {
    const std::int64_t value = std::stoll(token, &pos);
    if (pos != token.size()) return std::nullopt;
    return value;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

}  // namespace detail

struct EdgeListData {
  std::vector<std::pair<VertexId, VertexId>> edges;  // dense ids
  VertexId vertex_count = 0;
  std::vector<std::string> original_ids;  // dense id -> original token
  std::unordered_map<std::string, VertexId> id_map;
  bool integer_ids = false;
  std::int64_t duplicates_dropped = 0;
  std::int64_t self_loops_dropped = 0;
};

// Reads a whitespace-separated edge list. Lines whose first non-blank
// character is '#' are comments. When every id token is an integer, dense
// ids follow the sorted original values; otherwise they follow first
// appearance. Duplicate edges and self-loops are dropped and counted.
inline EdgeListData load_edgelist(const std::string& path) {
  std::ifstream input(path);
  if (!input) throw IoError("cannot open edge list: " + path);

  std::vector<std::pair<std::string, std::string>> raw_edges;
  bool all_integers = true;
  std::string line;
  std::int64_t line_number = 0;
  while (std::getline(input, line)) {
    ++line_number;
    if (detail::is_comment_or_blank(line)) continue;
    const auto tokens = detail::split_tokens(line);
    if (tokens.size() != 2)
      throw IoError(path + ":" + std::to_string(line_number) +
                    ": expected two vertex ids, got " +
                    std::to_string(tokens.size()) + " tokens");
    if (!detail::parse_integer(tokens[0]) || !detail::parse_integer(tokens[1]))
      all_integers = false;
    raw_edges.emplace_back(tokens[0], tokens[1]);
  }
  if (raw_edges.empty()) throw IoError(path + ": no edges found");

  EdgeListData data;
  data.integer_ids = all_integers;
  if (all_integers) {
    std::map<std::int64_t, std::string> ordered;
    for (const auto& [a, b] : raw_edges) {
      ordered.emplace(*detail::parse_integer(a), a);
      ordered.emplace(*detail::parse_integer(b), b);
    }
    for (const auto& [value, token] : ordered) {
      data.id_map.emplace(token, static_cast<VertexId>(data.original_ids.size()));
      data.original_ids.push_back(token);
    }
  } else {
    for (const auto& [a, b] : raw_edges)
      for (const std::string& token : {a, b})
        if (data.id_map.emplace(token,
                                static_cast<VertexId>(data.original_ids.size()))
                .second)
          data.original_ids.push_back(token);
  }
  data.vertex_count = static_cast<VertexId>(data.original_ids.size());

  std::vector<std::vector<VertexId>> seen(
      static_cast<std::size_t>(data.vertex_count));
  for (const auto& [a, b] : raw_edges) {
    VertexId u = data.id_map.at(a);
    VertexId v = data.id_map.at(b);
    if (u == v) {
      ++data.self_loops_dropped;
      continue;
    }
    if (u > v) std::swap(u, v);
    auto& bucket = seen[static_cast<std::size_t>(u)];
    if (std::find(bucket.begin(), bucket.end(), v) != bucket.end()) {
      ++data.duplicates_dropped;
      continue;
    }
    bucket.push_back(v);
    data.edges.emplace_back(u, v);
  }
  return data;
}

// Reads "vertex label" lines against a loaded edge list. Class ids are
// dense in first-appearance order of the label strings; every graph vertex
// must be covered exactly once.
inline LabeledDataset load_labels(const std::string& path,
                                  const EdgeListData& graph,
                                  std::vector<std::string>* class_names = nullptr) {
  std::ifstream input(path);
  if (!input) throw IoError("cannot open labels: " + path);

  LabeledDataset data;
  data.labels.assign(static_cast<std::size_t>(graph.vertex_count), -1);
  std::unordered_map<std::string, int> classes;
  std::vector<std::string> names;

  std::string line;
  std::int64_t line_number = 0;
  while (std::getline(input, line)) {
    ++line_number;
    if (detail::is_comment_or_blank(line)) continue;
    const auto tokens = detail::split_tokens(line);
    if (tokens.size() != 2)
      throw IoError(path + ":" + std::to_string(line_number) +
                    ": expected 'vertex label'");
    const auto vertex_it = graph.id_map.find(tokens[0]);
    if (vertex_it == graph.id_map.end())
      throw IoError(path + ":" + std::to_string(line_number) +
                    ": unknown vertex id '" + tokens[0] + "'");
    const auto [class_it, inserted] =
        classes.emplace(tokens[1], static_cast<int>(names.size()));
    if (inserted) names.push_back(tokens[1]);
    auto& slot = data.labels[static_cast<std::size_t>(vertex_it->second)];
    if (slot != -1)
      throw IoError(path + ":" + std::to_string(line_number) +
                    ": vertex '" + tokens[0] + "' labeled twice");
    slot = class_it->second;
  }
  for (VertexId v = 0; v < graph.vertex_count; ++v)
    if (data.labels[static_cast<std::size_t>(v)] == -1)
      throw IoError(path + ": vertex '" +
                    graph.original_ids[static_cast<std::size_t>(v)] +
                    "' has no label");
  data.class_count = static_cast<int>(names.size());
  validate_labels(data);
  if (class_names) *class_names = std::move(names);
  return data;
}

// --- embedding matrices ---------------------------------------------------

template <typename Derived>
void write_embedding_csv(const std::string& path,
                         const Eigen::MatrixBase<Derived>& F,
                         Eigen::Index first_id = 0) {
  std::ofstream output(path);
  if (!output) throw IoError("cannot write embedding: " + path);
  output << "vertex_id";
  for (Eigen::Index c = 0; c < F.cols(); ++c) output << ",f" << c;
  output << "\n";
  for (Eigen::Index v = 0; v < F.rows(); ++v) {
    output << (first_id + v);
    for (Eigen::Index c = 0; c < F.cols(); ++c)
      output << "," << format_double(static_cast<double>(F(v, c)));
    output << "\n";
  }
  if (!output) throw IoError("failed writing embedding: " + path);
}

inline Eigen::MatrixXd read_embedding_csv(const std::string& path) {
  std::ifstream input(path);
  if (!input) throw IoError("cannot open embedding: " + path);
  std::string line;
  if (!std::getline(input, line))
    throw IoError(path + ": missing header line");

  std::vector<std::vector<double>> rows;
  std::int64_t line_number = 1;
  while (std::getline(input, line)) {
    ++line_number;
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream stream(line);
    std::string cell;
    bool first = true;
    while (std::getline(stream, cell, ',')) {
      if (first) {
        first = false;
        continue;
      }
      try {
        row.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw IoError(path + ":" + std::to_string(line_number) +
                      ": bad number '" + cell + "'");
      }
    }
    if (!rows.empty() && row.size() != rows.front().size())
      throw IoError(path + ":" + std::to_string(line_number) +
                    ": inconsistent column count");
    rows.push_back(std::move(row));
  }
  Eigen::MatrixXd F(static_cast<Eigen::Index>(rows.size()),
                    rows.empty() ? 0
                                 : static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j)
      F(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          rows[i][j];
  return F;
}

// --- step timings and deviation reports -----------------------------------

template <typename Scalar>
void write_timings_csv(const std::string& path,
                       const std::vector<StepRecord<Scalar>>& steps,
                       Eigen::Index first_step = 0) {
  std::ofstream output(path);
  if (!output) throw IoError("cannot write timings: " + path);
  output << "step,vertex,influence_ns,update_ns,influenced_size\n";
  for (std::size_t i = 0; i < steps.size(); ++i) {
    const auto& record = steps[i];
    output << (first_step + static_cast<Eigen::Index>(i)) << ","
           << record.step.new_vertex << "," << record.influence_ns << ","
           << record.update_ns << "," << record.step.influenced.size() << "\n";
  }
  if (!output) throw IoError("failed writing timings: " + path);
}

inline void write_deviation_csv(const std::string& path,
                                const DeviationReport& report) {
  std::ofstream output(path);
  if (!output) throw IoError("cannot write deviation report: " + path);
  output << "step,seed,alpha,delta_L,bound,smoothness_term,homophily_term,"
            "precondition_ok\n";
  for (const auto& record : report.records)
    output << record.step << "," << record.seed << ","
           << format_double(record.alpha) << ","
           << format_double(record.delta_loss) << ","
           << format_double(record.bound) << ","
           << format_double(record.smoothness_term) << ","
           << format_double(record.homophily_term) << ","
           << (record.precondition_ok ? 1 : 0) << "\n";
  if (!output) throw IoError("failed writing deviation report: " + path);
}

// --- evaluation reports ---------------------------------------------------

struct RunConfig;
inline nlohmann::ordered_json config_echo(const RunConfig& cfg);

// The JSON report carries metrics, sizes, and the configuration echo, but
// no timing values: identical configuration and seed must produce
// byte-identical reports, and durations live in the timings CSV instead.
template <typename ConfigEcho>
void write_report_json(const std::string& path, const EvalReport& report,
                       const ConfigEcho& echo) {
  nlohmann::ordered_json j;
  j["micro_f1"] = report.micro_f1.has_value()
                      ? nlohmann::ordered_json(*report.micro_f1)
                      : nlohmann::ordered_json(nullptr);
  j["macro_f1"] = report.macro_f1.has_value()
                      ? nlohmann::ordered_json(*report.macro_f1)
                      : nlohmann::ordered_json(nullptr);
  j["nmi"] = report.nmi;
  j["completeness"] = report.completeness;
  j["classification_skipped"] = report.classification_skipped;
  j["vertex_count"] = report.vertex_count;
  j["prefix_size"] = report.prefix_size;
  j["arrivals"] = report.arrivals;
  j["config"] = echo;

  std::ofstream output(path);
  if (!output) throw IoError("cannot write report: " + path);
  output << j.dump(2) << "\n";
  if (!output) throw IoError("failed writing report: " + path);
}

// --- run configuration ----------------------------------------------------

// Flat key = value configuration mirrored 1:1 by the command-line flags;
// flags override file values.
struct RunConfig {
  int k = 90;
  int depth = 1;
  double train_fraction = 0.2;
  std::uint64_t seed = 1;
  int dense_threshold = 512;
  int reorth_interval = 0;
  double l2 = 1.0;
  std::string edges;
  std::string labels;
  std::string out_dir = ".";

  bool operator==(const RunConfig&) const = default;
};

inline void save_config(const std::string& path, const RunConfig& cfg) {
  std::ofstream output(path);
  if (!output) throw IoError("cannot write config: " + path);
  output << "k = " << cfg.k << "\n"
         << "depth = " << cfg.depth << "\n"
         << "train_fraction = " << format_double(cfg.train_fraction) << "\n"
         << "seed = " << cfg.seed << "\n"
         << "dense_threshold = " << cfg.dense_threshold << "\n"
         << "reorth_interval = " << cfg.reorth_interval << "\n"
         << "l2 = " << format_double(cfg.l2) << "\n";
  if (!cfg.edges.empty()) output << "edges = " << cfg.edges << "\n";
  if (!cfg.labels.empty()) output << "labels = " << cfg.labels << "\n";
  output << "out_dir = " << cfg.out_dir << "\n";
  if (!output) throw IoError("failed writing config: " + path);
}

inline nlohmann::ordered_json config_echo(const RunConfig& cfg) {
  nlohmann::ordered_json j;
  j["k"] = cfg.k;
  j["depth"] = cfg.depth;
  j["train_fraction"] = cfg.train_fraction;
  j["seed"] = cfg.seed;
  j["dense_threshold"] = cfg.dense_threshold;
  j["reorth_interval"] = cfg.reorth_interval;
  j["l2"] = cfg.l2;
  j["edges"] = cfg.edges;
  j["labels"] = cfg.labels;
  j["out_dir"] = cfg.out_dir;
  return j;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream input(path);
  if (!input) throw IoError("cannot open config: " + path);
  RunConfig cfg;
  std::string line;
  std::int64_t line_number = 0;
  while (std::getline(input, line)) {
    ++line_number;
    if (detail::is_comment_or_blank(line)) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw IoError(path + ":" + std::to_string(line_number) +
                    ": expected 'key = value'");
    const auto trim = [](std::string s) {
      const auto begin = s.find_first_not_of(" \t\r");
      const auto end = s.find_last_not_of(" \t\r");
      return begin == std::string::npos ? std::string()
                                        : s.substr(begin, end - begin + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    try {
      if (key == "k")
        cfg.k = std::stoi(value);
      else if (key == "depth")
        cfg.depth = std::stoi(value);
      else if (key == "train_fraction")
        cfg.train_fraction = std::stod(value);
      else if (key == "seed")
        cfg.seed = std::stoull(value);
      else if (key == "dense_threshold")
        cfg.dense_threshold = std::stoi(value);
      else if (key == "reorth_interval")
        cfg.reorth_interval = std::stoi(value);
      else if (key == "l2")
        cfg.l2 = std::stod(value);
      else if (key == "edges")
        cfg.edges = value;
      else if (key == "labels")
        cfg.labels = value;
      else if (key == "out_dir")
        cfg.out_dir = value;
      else
        throw IoError(path + ":" + std::to_string(line_number) +
                      ": unknown key '" + key + "'");
    } catch (const IoError&) {
      throw;
    } catch (const std::exception&) {
      throw IoError(path + ":" + std::to_string(line_number) +
                    ": bad value for '" + key + "'");
    }
  }
  return cfg;
}

}  // namespace sge
