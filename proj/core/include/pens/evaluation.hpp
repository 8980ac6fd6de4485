#pragma once

// Accuracy and Recall@n over ranked predictions, kept as exact rationals,
// plus the ensemble-improvement table.

#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace pens {

/// Non-normalised inputs are reduced; the denominator is always positive.
class Ratio {
 public:
  Ratio() = default;
  Ratio(std::int64_t num, std::int64_t den);

  std::int64_t num() const { return num_; }
  std::int64_t den() const { return den_; }
  double value() const { return static_cast<double>(num_) / static_cast<double>(den_); }

  friend Ratio operator+(const Ratio& a, const Ratio& b);
  friend Ratio operator-(const Ratio& a, const Ratio& b);
  friend Ratio operator*(const Ratio& a, const Ratio& b);
  friend Ratio operator/(const Ratio& a, const Ratio& b);
  friend bool operator==(const Ratio& a, const Ratio& b) = default;
  friend std::strong_ordering operator<=>(const Ratio& a, const Ratio& b);

 private:
  std::int64_t num_ = 0;
  std::int64_t den_ = 1;
};

/// Rounds half away from zero to `decimals` places: render(Ratio(3, 4), 2)
/// == "0.75".
std::string render(const Ratio& r, int decimals);
/// 100 * r rendered to 2 decimals: render_percent(Ratio(3, 4)) == "75.00".
std::string render_percent(const Ratio& r);

using ProbabilityVector = std::vector<double>;

/// Labels sorted by probability descending; equal probabilities keep
/// ascending label index.
struct PredictionRanking {
  std::string doc_id;
  std::vector<std::size_t> labels;
  std::vector<double> probabilities;  // aligned with `labels`

  std::size_t top() const { return labels.front(); }
};

PredictionRanking rank_labels(std::string doc_id, std::span<const double> probabilities);

using GoldLabels = std::unordered_map<std::string, std::size_t>;

/// Fraction of rankings whose first label is the gold label. Throws when a
/// ranking has no gold label or the input is empty.
Ratio accuracy(std::span<const PredictionRanking> rankings, const GoldLabels& gold);

/// Fraction of rankings with the gold label among the first n positions.
/// Throws for n < 1.
Ratio recall_at_n(std::span<const PredictionRanking> rankings, const GoldLabels& gold,
                  std::size_t n);

struct EvalReport {
  std::size_t num_docs = 0;
  Ratio accuracy;
  std::map<std::size_t, Ratio> recall_at;
  /// (gold, predicted top-1) -> count
  std::map<std::pair<std::size_t, std::size_t>, std::size_t> confusion;
};

EvalReport evaluate(std::span<const PredictionRanking> rankings, const GoldLabels& gold,
                    std::span<const std::size_t> cutoffs);
/// Cutoffs 1, 3, 5 and 10.
EvalReport evaluate(std::span<const PredictionRanking> rankings, const GoldLabels& gold);

/// `label_names` (optional) names confusion entries by label instead of index.
std::string report_to_json(const EvalReport& report,
                           std::span<const std::string> label_names = {});
/// "metric,value" then one row per metric (accuracy, r_at_<n>, num_docs).
std::string report_to_csv(const EvalReport& report);

struct ImprovementRow {
  std::string architecture;
  std::array<Ratio, 3> members;  // accuracies, fractions in [0, 1]
  Ratio mean;
  Ratio ensemble;
  Ratio improvement_pct;  // 100 * (ensemble - mean) / mean

  std::string mean_percent() const { return render_percent(mean); }
  std::string improvement_percent() const { return render(improvement_pct, 2); }
};

ImprovementRow improvement_row(std::string architecture, const std::array<Ratio, 3>& members,
                               const Ratio& ensemble);

struct ArchitectureReports {
  std::string architecture;
  std::array<EvalReport, 3> members;
  EvalReport ensemble;
};

std::vector<ImprovementRow> improvement_table(std::span<const ArchitectureReports> reports);

/// Header "architecture,member_1,member_2,member_3,mean,ensemble,improvement_pct";
/// accuracies as percentages, everything to 2 decimals.
std::string improvement_to_csv(std::span<const ImprovementRow> rows);

}  // namespace pens
