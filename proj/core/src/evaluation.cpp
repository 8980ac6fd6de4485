#include "pens/evaluation.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

#include "json.hpp"
#include "pens/error.hpp"

namespace pens {

using json = nlohmann::ordered_json;
__extension__ typedef __int128 Wide;

namespace {

Ratio reduce(Wide num, Wide den) {
  if (den == 0) throw Error("ratio with zero denominator");
  if (den < 0) {
    num = -num;
    den = -den;
  }
  Wide a = num < 0 ? -num : num;
  Wide b = den;
  while (b != 0) {
    const Wide t = a % b;
    a = b;
    b = t;
  }
  if (a > 1) {
    num /= a;
    den /= a;
  }
  constexpr Wide kMax = std::numeric_limits<std::int64_t>::max();
  if (num > kMax || -num > kMax || den > kMax) throw Error("ratio overflow");
  return {static_cast<std::int64_t>(num), static_cast<std::int64_t>(den)};
}

}  // namespace

Ratio::Ratio(std::int64_t num, std::int64_t den) {
  if (den == 0) throw Error("ratio with zero denominator");
  std::int64_t g = std::gcd(num, den);
  if (g == 0) g = 1;
  num_ = num / g;
  den_ = den / g;
  if (den_ < 0) {
    num_ = -num_;
    den_ = -den_;
  }
}

Ratio operator+(const Ratio& a, const Ratio& b) {
  return reduce(Wide(a.num_) * b.den_ + Wide(b.num_) * a.den_, Wide(a.den_) * b.den_);
}

Ratio operator-(const Ratio& a, const Ratio& b) {
  return reduce(Wide(a.num_) * b.den_ - Wide(b.num_) * a.den_, Wide(a.den_) * b.den_);
}

Ratio operator*(const Ratio& a, const Ratio& b) {
  return reduce(Wide(a.num_) * b.num_, Wide(a.den_) * b.den_);
}

Ratio operator/(const Ratio& a, const Ratio& b) {
  if (b.num_ == 0) throw Error("ratio division by zero");
  return reduce(Wide(a.num_) * b.den_, Wide(a.den_) * b.num_);
}

std::strong_ordering operator<=>(const Ratio& a, const Ratio& b) {
  const Wide l = Wide(a.num_) * b.den_;
  const Wide r = Wide(b.num_) * a.den_;
  if (l < r) return std::strong_ordering::less;
  if (l > r) return std::strong_ordering::greater;
  return std::strong_ordering::equal;
}

std::string render(const Ratio& r, int decimals) {
  Wide scale = 1;
  for (int i = 0; i < decimals; ++i) scale *= 10;
  const bool negative = r.num() < 0;
  const Wide mag = negative ? -Wide(r.num()) : Wide(r.num());
  // round half away from zero: floor((2 * mag * scale + den) / (2 * den))
  const Wide scaled = (2 * mag * scale + r.den()) / (2 * Wide(r.den()));
  const Wide whole = scaled / scale;
  Wide frac = scaled % scale;
  std::string out = negative && scaled != 0 ? "-" : "";
  out += std::to_string(static_cast<long long>(whole));
  if (decimals > 0) {
    std::string digits(static_cast<std::size_t>(decimals), '0');
    for (int i = decimals - 1; i >= 0; --i) {
      digits[static_cast<std::size_t>(i)] = static_cast<char>('0' + static_cast<int>(frac % 10));
      frac /= 10;
    }
    out += "." + digits;
  }
  return out;
}

std::string render_percent(const Ratio& r) { return render(r * Ratio(100, 1), 2); }

PredictionRanking rank_labels(std::string doc_id, std::span<const double> probabilities) {
  PredictionRanking out;
  out.doc_id = std::move(doc_id);
  out.labels.resize(probabilities.size());
  std::iota(out.labels.begin(), out.labels.end(), std::size_t{0});
  std::stable_sort(out.labels.begin(), out.labels.end(), [&](std::size_t a, std::size_t b) {
    return probabilities[a] > probabilities[b];
  });
  out.probabilities.reserve(probabilities.size());
  for (std::size_t l : out.labels) out.probabilities.push_back(probabilities[l]);
  return out;
}

namespace {

std::size_t gold_of(const PredictionRanking& r, const GoldLabels& gold) {
  const auto it = gold.find(r.doc_id);
  if (it == gold.end()) throw Error("no gold label for document '" + r.doc_id + "'");
  return it->second;
}

void require_docs(std::span<const PredictionRanking> rankings) {
  if (rankings.empty()) throw Error("evaluation needs at least one document");
}

}  // namespace

Ratio accuracy(std::span<const PredictionRanking> rankings, const GoldLabels& gold) {
  return recall_at_n(rankings, gold, 1);
}

Ratio recall_at_n(std::span<const PredictionRanking> rankings, const GoldLabels& gold,
                  std::size_t n) {
  if (n < 1) throw Error("recall_at_n: n must be >= 1");
  require_docs(rankings);
  std::int64_t hits = 0;
  for (const auto& r : rankings) {
    const std::size_t g = gold_of(r, gold);
    const std::size_t reach = std::min(n, r.labels.size());
    if (std::find(r.labels.begin(), r.labels.begin() + static_cast<std::ptrdiff_t>(reach), g) !=
        r.labels.begin() + static_cast<std::ptrdiff_t>(reach)) {
      ++hits;
    }
  }
  return {hits, static_cast<std::int64_t>(rankings.size())};
}

EvalReport evaluate(std::span<const PredictionRanking> rankings, const GoldLabels& gold,
                    std::span<const std::size_t> cutoffs) {
  EvalReport report;
  report.num_docs = rankings.size();
  report.accuracy = accuracy(rankings, gold);
  for (std::size_t n : cutoffs) report.recall_at[n] = recall_at_n(rankings, gold, n);
  for (const auto& r : rankings) ++report.confusion[{gold_of(r, gold), r.top()}];
  return report;
}

EvalReport evaluate(std::span<const PredictionRanking> rankings, const GoldLabels& gold) {
  static constexpr std::array<std::size_t, 4> kCutoffs = {1, 3, 5, 10};
  return evaluate(rankings, gold, kCutoffs);
}

std::string report_to_json(const EvalReport& report, std::span<const std::string> label_names) {
  const auto name = [&](std::size_t i) {
    return i < label_names.size() ? label_names[i] : std::to_string(i);
  };
  json obj;
  obj["num_docs"] = report.num_docs;
  obj["accuracy"] = report.accuracy.value();
  obj["accuracy_exact"] = std::to_string(report.accuracy.num()) + "/" +
                          std::to_string(report.accuracy.den());
  json recall = json::object();
  for (const auto& [n, r] : report.recall_at) recall[std::to_string(n)] = r.value();
  obj["recall_at"] = recall;
  json confusion = json::array();
  for (const auto& [key, count] : report.confusion) {
    confusion.push_back({{"gold", name(key.first)}, {"predicted", name(key.second)}, {"count", count}});
  }
  obj["confusion_top1"] = confusion;
  return obj.dump(2) + "\n";
}

std::string report_to_csv(const EvalReport& report) {
  std::string out = "metric,value\n";
  out += "accuracy," + render(report.accuracy, 6) + "\n";
  for (const auto& [n, r] : report.recall_at) {
    out += "r_at_" + std::to_string(n) + "," + render(r, 6) + "\n";
  }
  out += "num_docs," + std::to_string(report.num_docs) + "\n";
  return out;
}

ImprovementRow improvement_row(std::string architecture, const std::array<Ratio, 3>& members,
                               const Ratio& ensemble) {
  ImprovementRow row;
  row.architecture = std::move(architecture);
  row.members = members;
  row.mean = (members[0] + members[1] + members[2]) / Ratio(3, 1);
  row.ensemble = ensemble;
  row.improvement_pct = Ratio(100, 1) * (ensemble - row.mean) / row.mean;
  return row;
}

std::vector<ImprovementRow> improvement_table(std::span<const ArchitectureReports> reports) {
  std::vector<ImprovementRow> rows;
  for (const auto& r : reports) {
    rows.push_back(improvement_row(
        r.architecture,
        {r.members[0].accuracy, r.members[1].accuracy, r.members[2].accuracy},
        r.ensemble.accuracy));
  }
  return rows;
}

std::string improvement_to_csv(std::span<const ImprovementRow> rows) {
  std::string out = "architecture,member_1,member_2,member_3,mean,ensemble,improvement_pct\n";
  for (const auto& r : rows) {
    out += r.architecture;
    for (const auto& m : r.members) out += "," + render_percent(m);
    out += "," + r.mean_percent() + "," + render_percent(r.ensemble) + "," +
           r.improvement_percent() + "\n";
  }
  return out;
}

}  // namespace pens
