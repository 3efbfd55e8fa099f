#include "eavit/eval/metrics.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "eavit/errors.h"

namespace eavit::eval {
namespace {

std::string number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream in(line);
  std::string item;
  while (std::getline(in, item, ',')) out.push_back(item);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  return out;
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  return in;
}

double parse_double(const std::string& text, const std::filesystem::path& path) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used == text.size()) return v;
  } catch (const std::exception&) {
  }
  throw DataError(path.string() + ": bad number '" + text + "'");
}

std::string escape_xml(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

std::size_t ConfusionMatrix::total() const {
  std::size_t sum = 0;
  for (auto c : counts) sum += c;
  return sum;
}

std::size_t ConfusionMatrix::row_sum(std::size_t truth) const {
  std::size_t sum = 0;
  for (std::size_t p = 0; p < classes(); ++p) sum += at(truth, p);
  return sum;
}

std::size_t ConfusionMatrix::column_sum(std::size_t predicted) const {
  std::size_t sum = 0;
  for (std::size_t t = 0; t < classes(); ++t) sum += at(t, predicted);
  return sum;
}

ConfusionMatrix confusion(std::span<const int> predictions, std::span<const int> labels,
                          std::vector<std::string> class_names) {
  if (predictions.size() != labels.size()) {
    throw ShapeError("confusion: " + std::to_string(predictions.size()) + " predictions for " +
                     std::to_string(labels.size()) + " labels");
  }
  if (predictions.empty()) throw ShapeError("confusion: no samples");
  ConfusionMatrix cm;
  const std::size_t n = class_names.size();
  cm.class_names = std::move(class_names);
  cm.counts.assign(n * n, 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int t = labels[i], p = predictions[i];
    if (t < 0 || p < 0 || static_cast<std::size_t>(t) >= n || static_cast<std::size_t>(p) >= n) {
      throw std::out_of_range("confusion: class index out of range at sample " + std::to_string(i));
    }
    ++cm.counts[static_cast<std::size_t>(t) * n + static_cast<std::size_t>(p)];
  }
  return cm;
}

double accuracy(const ConfusionMatrix& cm) {
  const std::size_t total = cm.total();
  if (total == 0) throw std::invalid_argument("accuracy of an empty confusion matrix");
  std::size_t trace = 0;
  for (std::size_t k = 0; k < cm.classes(); ++k) trace += cm.at(k, k);
  return static_cast<double>(trace) / static_cast<double>(total);
}

double f1_score(double precision, double recall) {
  const double sum = precision + recall;
  return sum > 0 ? 2 * precision * recall / sum : 0.0;
}

ClassMetrics precision_recall_f1(const ConfusionMatrix& cm, std::size_t k) {
  if (k >= cm.classes()) throw std::out_of_range("class " + std::to_string(k) + " out of range");
  ClassMetrics m;
  m.true_positives = cm.at(k, k);
  m.false_positives = cm.column_sum(k) - m.true_positives;
  m.false_negatives = cm.row_sum(k) - m.true_positives;
  const auto tp = static_cast<double>(m.true_positives);
  if (m.true_positives + m.false_positives == 0) {
    m.precision_undefined = true;
  } else {
    m.precision = tp / static_cast<double>(m.true_positives + m.false_positives);
  }
  if (m.true_positives + m.false_negatives == 0) {
    m.recall_undefined = true;
  } else {
    m.recall = tp / static_cast<double>(m.true_positives + m.false_negatives);
  }
  // 2PR / (P + R) written in counts: one rounding, so min(P, R) <= F1 <= max(P, R).
  m.f1_undefined = m.true_positives == 0;
  if (!m.f1_undefined) {
    m.f1 = 2 * tp / static_cast<double>(2 * m.true_positives + m.false_positives + m.false_negatives);
  }
  return m;
}

MetricsReport report(const ConfusionMatrix& cm) {
  MetricsReport r;
  r.class_names = cm.class_names;
  r.accuracy = accuracy(cm);
  for (std::size_t k = 0; k < cm.classes(); ++k) {
    r.per_class.push_back(precision_recall_f1(cm, k));
    r.macro_precision += r.per_class.back().precision;
    r.macro_recall += r.per_class.back().recall;
    r.macro_f1 += r.per_class.back().f1;
  }
  const auto n = static_cast<double>(cm.classes());
  r.macro_precision /= n;
  r.macro_recall /= n;
  r.macro_f1 /= n;
  return r;
}

void write_metrics_csv(const std::filesystem::path& path, const MetricsReport& report) {
  auto out = open_output(path);
  out << "class,precision,recall,f1\n";
  for (std::size_t k = 0; k < report.per_class.size(); ++k) {
    const auto& m = report.per_class[k];
    out << report.class_names[k] << ',' << number(m.precision) << ',' << number(m.recall) << ',' << number(m.f1)
        << '\n';
  }
  out << "macro," << number(report.macro_precision) << ',' << number(report.macro_recall) << ','
      << number(report.macro_f1) << '\n';
  if (!out) throw DataError("failed writing " + path.string());
}

MetricsReport read_metrics_csv(const std::filesystem::path& path) {
  auto in = open_input(path);
  std::string line;
  if (!std::getline(in, line) || line != "class,precision,recall,f1") {
    throw DataError(path.string() + ": bad metrics header");
  }
  MetricsReport r;
  bool macro = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    if (cells.size() != 4) throw DataError(path.string() + ": malformed row '" + line + "'");
    const double p = parse_double(cells[1], path), rc = parse_double(cells[2], path),
                 f = parse_double(cells[3], path);
    if (cells[0] == "macro") {
      r.macro_precision = p;
      r.macro_recall = rc;
      r.macro_f1 = f;
      macro = true;
      continue;
    }
    r.class_names.push_back(cells[0]);
    ClassMetrics m;
    m.precision = p;
    m.recall = rc;
    m.f1 = f;
    r.per_class.push_back(m);
  }
  if (!macro) throw DataError(path.string() + ": missing macro row");
  return r;
}

void write_confusion_csv(const std::filesystem::path& path, const ConfusionMatrix& cm) {
  auto out = open_output(path);
  for (std::size_t k = 0; k < cm.classes(); ++k) out << (k ? "," : "") << cm.class_names[k];
  out << '\n';
  for (std::size_t t = 0; t < cm.classes(); ++t) {
    for (std::size_t p = 0; p < cm.classes(); ++p) out << (p ? "," : "") << cm.at(t, p);
    out << '\n';
  }
  if (!out) throw DataError("failed writing " + path.string());
}

ConfusionMatrix read_confusion_csv(const std::filesystem::path& path) {
  auto in = open_input(path);
  std::string line;
  if (!std::getline(in, line)) throw DataError(path.string() + ": empty confusion file");
  ConfusionMatrix cm;
  cm.class_names = split_csv(line);
  const std::size_t n = cm.classes();
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    if (cells.size() != n) throw DataError(path.string() + ": row width does not match header");
    for (const auto& c : cells) {
      try {
        std::size_t used = 0;
        cm.counts.push_back(std::stoull(c, &used));
        if (used != c.size()) throw std::invalid_argument(c);
      } catch (const std::exception&) {
        throw DataError(path.string() + ": bad count '" + c + "'");
      }
    }
  }
  if (cm.counts.size() != n * n) throw DataError(path.string() + ": expected " + std::to_string(n) + " rows");
  return cm;
}

void write_confusion_svg(const std::filesystem::path& path, const ConfusionMatrix& cm) {
  const std::size_t n = cm.classes();
  const int cell = 44, left = 90, top = 30;
  const int size = static_cast<int>(n) * cell;
  auto out = open_output(path);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << left + size + 20 << "\" height=\""
      << top + size + 90 << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  for (std::size_t t = 0; t < n; ++t) {
    const double row = static_cast<double>(std::max<std::size_t>(cm.row_sum(t), 1));
    for (std::size_t p = 0; p < n; ++p) {
      const double share = static_cast<double>(cm.at(t, p)) / row;
      const int shade = static_cast<int>(255 - 200 * share);
      const int x = left + static_cast<int>(p) * cell, y = top + static_cast<int>(t) * cell;
      out << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << cell << "\" height=\"" << cell << "\" fill=\"rgb("
          << shade << ',' << shade << ",255)\" stroke=\"#ccc\"/>\n";
      out << "<text x=\"" << x + cell / 2 << "\" y=\"" << y + cell / 2 + 4 << "\" text-anchor=\"middle\">"
          << cm.at(t, p) << "</text>\n";
    }
    out << "<text x=\"" << left - 6 << "\" y=\"" << top + static_cast<int>(t) * cell + cell / 2 + 4
        << "\" text-anchor=\"end\">" << escape_xml(cm.class_names[t]) << "</text>\n";
  }
  for (std::size_t p = 0; p < n; ++p) {
    const int x = left + static_cast<int>(p) * cell + cell / 2, y = top + size + 10;
    out << "<text x=\"" << x << "\" y=\"" << y << "\" transform=\"rotate(45 " << x << ' ' << y << ")\">"
        << escape_xml(cm.class_names[p]) << "</text>\n";
  }
  out << "<text x=\"" << left + size / 2 << "\" y=\"" << top - 10
      << "\" text-anchor=\"middle\">predicted</text>\n";
  out << "</svg>\n";
  if (!out) throw DataError("failed writing " + path.string());
}

void write_curves_svg(const std::filesystem::path& path, const std::vector<std::string>& titles,
                      const std::vector<std::vector<Series>>& panels) {
  static const char* colours[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd"};
  const int width = 420, height = 260, pad = 40;
  auto out = open_output(path);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width * static_cast<int>(panels.size())
      << "\" height=\"" << height << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  for (std::size_t k = 0; k < panels.size(); ++k) {
    const int x0 = static_cast<int>(k) * width;
    double lo = 1e300, hi = -1e300;
    std::size_t epochs = 1;
    for (const auto& s : panels[k]) {
      epochs = std::max(epochs, s.values.size());
      for (double v : s.values)
        if (std::isfinite(v)) lo = std::min(lo, v), hi = std::max(hi, v);
    }
    if (lo > hi) lo = 0, hi = 1;
    if (hi - lo < 1e-12) hi = lo + 1;
    auto px = [&](std::size_t i) { return x0 + pad + (width - 2 * pad) * (epochs > 1 ? double(i) / double(epochs - 1) : 0.0); };
    auto py = [&](double v) { return height - pad - (height - 2 * pad) * (v - lo) / (hi - lo); };
    out << "<rect x=\"" << x0 + pad << "\" y=\"" << pad << "\" width=\"" << width - 2 * pad << "\" height=\""
        << height - 2 * pad << "\" fill=\"none\" stroke=\"#888\"/>\n";
    out << "<text x=\"" << x0 + width / 2 << "\" y=\"" << pad - 12 << "\" text-anchor=\"middle\">"
        << escape_xml(k < titles.size() ? titles[k] : "") << "</text>\n";
    out << "<text x=\"" << x0 + pad - 4 << "\" y=\"" << pad + 4 << "\" text-anchor=\"end\">" << number(hi).substr(0, 6)
        << "</text>\n";
    out << "<text x=\"" << x0 + pad - 4 << "\" y=\"" << height - pad << "\" text-anchor=\"end\">"
        << number(lo).substr(0, 6) << "</text>\n";
    out << "<text x=\"" << x0 + width / 2 << "\" y=\"" << height - 12 << "\" text-anchor=\"middle\">epoch</text>\n";
    for (std::size_t s = 0; s < panels[k].size(); ++s) {
      const auto& series = panels[k][s];
      const char* colour = colours[s % 4];
      out << "<polyline fill=\"none\" stroke=\"" << colour << "\" points=\"";
      for (std::size_t i = 0; i < series.values.size(); ++i)
        if (std::isfinite(series.values[i])) out << px(i) << ',' << py(series.values[i]) << ' ';
      out << "\"/>\n";
      out << "<text x=\"" << x0 + width - pad - 4 << "\" y=\"" << pad + 14 + 14 * static_cast<int>(s)
          << "\" text-anchor=\"end\" fill=\"" << colour << "\">" << escape_xml(series.name) << "</text>\n";
    }
  }
  out << "</svg>\n";
  if (!out) throw DataError("failed writing " + path.string());
}

int vote(const std::vector<std::vector<double>>& probabilities) {
  if (probabilities.empty()) throw std::invalid_argument("vote over no segments");
  const std::size_t classes = probabilities.front().size();
  std::vector<std::size_t> votes(classes, 0);
  std::vector<double> mass(classes, 0.0);
  for (const auto& row : probabilities) {
    if (row.size() != classes) throw ShapeError("vote: segment probability rows differ in length");
    ++votes[static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin())];
    for (std::size_t c = 0; c < classes; ++c) mass[c] += row[c];
  }
  std::size_t best = 0;
  for (std::size_t c = 1; c < classes; ++c) {
    if (votes[c] > votes[best] || (votes[c] == votes[best] && mass[c] > mass[best])) best = c;
  }
  return static_cast<int>(best);
}

std::vector<TrackPrediction> majority_vote(const std::vector<std::vector<double>>& probabilities,
                                           std::span<const int> labels, std::span<const std::string> track_ids) {
  if (probabilities.size() != labels.size() || labels.size() != track_ids.size()) {
    throw ShapeError("majority_vote: probabilities, labels and track ids differ in length");
  }
  std::vector<TrackPrediction> tracks;
  std::vector<std::vector<std::vector<double>>> grouped;
  std::map<std::string, std::size_t> slot;
  for (std::size_t i = 0; i < track_ids.size(); ++i) {
    auto [it, fresh] = slot.emplace(track_ids[i], tracks.size());
    if (fresh) {
      tracks.push_back({track_ids[i], labels[i], 0, 0});
      grouped.emplace_back();
    }
    grouped[it->second].push_back(probabilities[i]);
    ++tracks[it->second].segments;
  }
  for (std::size_t k = 0; k < tracks.size(); ++k) tracks[k].predicted = vote(grouped[k]);
  return tracks;
}

}  // namespace eavit::eval
