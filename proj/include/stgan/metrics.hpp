#pragma once

#include <array>
#include <cstddef>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace stgan::metrics {

using Tokens = std::vector<std::string>;
using NgramCounts = std::map<Tokens, std::size_t>;

struct EvalPair {
  Tokens hypothesis;
  std::vector<Tokens> references;
};

inline constexpr double kBleuEpsilon = 1e-9;

NgramCounts ngram_counts(std::span<const std::string> tokens, std::size_t n);

/// Corpus BLEU with pooled clipped counts and closest-length brevity penalty.
/// A zero (or undefined) k-gram precision is replaced by kBleuEpsilon.
double bleu(std::span<const EvalPair> pairs, std::size_t max_n);

enum class RougeVariant { L, One, Two };
/// ROUGE-L is the LCS F1; ROUGE-1/2 are clipped n-gram recall. Mean over
/// pairs, best reference per pair.
double rouge(std::span<const EvalPair> pairs, RougeVariant variant = RougeVariant::L);
std::size_t lcs_length(std::span<const std::string> a, std::span<const std::string> b);

/// Strips the longest of ing/edly/ed/ly/es/s that leaves at least 3 characters.
std::string stem(std::string_view word);

struct Alignment {
  std::vector<std::pair<std::size_t, std::size_t>> links;  // (hyp index, ref index), by hyp index
  std::size_t chunks = 0;
};
/// Exact matches first, then stem matches; each hyp token left to right takes
/// the first free reference token.
Alignment align(std::span<const std::string> hyp, std::span<const std::string> ref);
double meteor_sentence(std::span<const std::string> hyp, std::span<const std::string> ref);
double meteor_lite(std::span<const EvalPair> pairs);

double pearson(std::span<const double> x, std::span<const double> y);

enum class Label { Real = 0, Fake = 1 };

struct Rating {
  Label actual;
  int rating;  // 1 certainly human ... 5 certainly model
};

struct RatingTable {
  // counts[actual][judged], judged index 0 = real, 1 = fake.
  std::array<std::array<double, 2>, 2> counts{};

  /// Row percentages; nullopt for a row with no weight.
  std::optional<std::array<double, 2>> row_percentages(Label actual) const;
};

RatingTable weighted_human_scores(std::span<const Rating> ratings);

// ---- reports --------------------------------------------------------------

struct MetricRow {
  std::string model;
  std::string embedding;
  std::string metric;
  double value = 0;
};

struct MetricReport {
  std::vector<MetricRow> rows;
};

/// Metric names: bleu1..bleu4, rougeL, rouge1, rouge2, meteor.
double compute_metric(std::string_view name, std::span<const EvalPair> pairs);
std::vector<std::string> parse_metric_list(std::string_view list);

/// Header "model,embedding,metric,value", fixed six-decimal values. Rejects an
/// empty report or any value outside [0,1].
void write_report_csv(const MetricReport& report, std::ostream& os);
MetricReport read_report_csv(std::istream& is);
void write_rating_csv(const RatingTable& table, std::ostream& os);

}  // namespace stgan::metrics
