#pragma once
// Argument-level scoring. Records are compared by (role, normalized argument
// surface); predicted and gold records of one event type are aligned
// one-to-one. Instances up to 3x3 records use exact optimal assignment;
// larger ones use the greedy most-shared-first pairing (lower pred index,
// then lower gold index on ties).

#include <algorithm>
#include <functional>
#include <map>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "redee/dataset.hpp"
#include "redee/document.hpp"

namespace redee {

struct MatchCounts {
  long tp = 0, fp = 0, fn = 0;
  std::vector<std::pair<int, int>> alignment;  // (pred index, gold index)
};

namespace detail {

inline long shared_args(const EventRecord& a, const EventRecord& b) {
  long n = 0;
  for (const auto& [role, val] : a.args) {
    auto it = b.args.find(role);
    if (it != b.args.end() && it->second == val) ++n;
  }
  return n;
}

inline long total_args(const std::vector<EventRecord>& rs) {
  long n = 0;
  for (const auto& r : rs) n += static_cast<long>(r.args.size());
  return n;
}

}  // namespace detail

inline MatchCounts match_records(const std::vector<EventRecord>& predicted,
                                 const std::vector<EventRecord>& gold) {
  MatchCounts out;
  const int np = static_cast<int>(predicted.size()), ng = static_cast<int>(gold.size());
  std::vector<std::vector<long>> shared(static_cast<std::size_t>(np),
                                        std::vector<long>(static_cast<std::size_t>(ng), 0));
  for (int i = 0; i < np; ++i)
    for (int j = 0; j < ng; ++j)
      shared[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] =
          detail::shared_args(predicted[static_cast<std::size_t>(i)], gold[static_cast<std::size_t>(j)]);

  long matched = 0;
  if (np <= 3 && ng <= 3) {
    // exact: maximize total shared over injective assignments; the first
    // maximizer in lexicographic order wins
    std::vector<int> best_assign;
    long best = -1;
    std::vector<int> assign(static_cast<std::size_t>(np), -1);
    std::vector<bool> used(static_cast<std::size_t>(ng), false);
    std::function<void(int, long)> rec = [&](int i, long acc) {
      if (i == np) {
        if (acc > best) {
          best = acc;
          best_assign = assign;
        }
        return;
      }
      for (int j = 0; j < ng; ++j) {
        if (used[static_cast<std::size_t>(j)]) continue;
        used[static_cast<std::size_t>(j)] = true;
        assign[static_cast<std::size_t>(i)] = j;
        rec(i + 1, acc + shared[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]);
        used[static_cast<std::size_t>(j)] = false;
        assign[static_cast<std::size_t>(i)] = -1;
      }
      rec(i + 1, acc);  // leave this prediction unmatched
    };
    rec(0, 0);
    if (best < 0) best = 0;
    matched = best;
    for (int i = 0; i < np; ++i)
      if (i < static_cast<int>(best_assign.size()) && best_assign[static_cast<std::size_t>(i)] >= 0)
        out.alignment.emplace_back(i, best_assign[static_cast<std::size_t>(i)]);
  } else {
    std::vector<bool> used_p(static_cast<std::size_t>(np), false), used_g(static_cast<std::size_t>(ng), false);
    const int rounds = std::min(np, ng);
    for (int r = 0; r < rounds; ++r) {
      long best = -1;
      int bi = -1, bj = -1;
      for (int i = 0; i < np; ++i) {
        if (used_p[static_cast<std::size_t>(i)]) continue;
        for (int j = 0; j < ng; ++j) {
          if (used_g[static_cast<std::size_t>(j)]) continue;
          if (shared[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] > best) {
            best = shared[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
            bi = i;
            bj = j;
          }
        }
      }
      used_p[static_cast<std::size_t>(bi)] = true;
      used_g[static_cast<std::size_t>(bj)] = true;
      out.alignment.emplace_back(bi, bj);
      matched += best;
    }
  }
  out.tp = matched;
  out.fp = detail::total_args(predicted) - matched;
  out.fn = detail::total_args(gold) - matched;
  return out;
}

struct PrfRow {
  long tp = 0, fp = 0, fn = 0;
  double p = 0, r = 0, f1 = 0;

  void finish() {
    p = (tp + fp) > 0 ? static_cast<double>(tp) / (tp + fp) : 0.0;  // 0 on empty predictions
    r = (tp + fn) > 0 ? static_cast<double>(tp) / (tp + fn) : 0.0;
    f1 = (p + r) > 0 ? 2 * p * r / (p + r) : 0.0;
  }
};

struct EvalReport {
  std::map<std::string, PrfRow> per_type;
  PrfRow micro;  // pooled counts over all event types
  long documents = 0;

  bool empty_marked() const { return documents == 0; }
};

inline EvalReport micro_prf(const std::vector<std::map<std::string, MatchCounts>>& per_doc_counts) {
  EvalReport rep;
  rep.documents = static_cast<long>(per_doc_counts.size());
  for (const auto& doc : per_doc_counts)
    for (const auto& [ty, c] : doc) {
      auto& row = rep.per_type[ty];
      row.tp += c.tp;
      row.fp += c.fp;
      row.fn += c.fn;
    }
  for (auto& [ty, row] : rep.per_type) {
    row.finish();
    rep.micro.tp += row.tp;
    rep.micro.fp += row.fp;
    rep.micro.fn += row.fn;
  }
  rep.micro.finish();
  return rep;
}

// Gold records with entity ids replaced by canonical normalized surfaces,
// comparable against predicted records.
inline std::vector<EventRecord> surface_records(const AnnotatedDoc& ad) {
  std::map<std::string, std::string> surface;
  for (const auto& e : ad.entities)
    if (!e.mentions.empty()) surface[e.id] = normalize_surface(e.mentions.front().surface);
  std::vector<EventRecord> out;
  for (const auto& r : ad.records) {
    EventRecord s;
    s.event_type = r.event_type;
    for (const auto& [role, id] : r.args) {
      auto it = surface.find(id);
      if (it != surface.end()) s.args[role] = it->second;
    }
    out.push_back(std::move(s));
  }
  return out;
}

// Per-document counts for one (predicted, gold) record pair list, split by
// event type.
inline std::map<std::string, MatchCounts> count_document(const std::vector<EventRecord>& predicted,
                                                         const std::vector<EventRecord>& gold) {
  std::set<std::string> types;
  for (const auto& r : predicted) types.insert(r.event_type);
  for (const auto& r : gold) types.insert(r.event_type);
  std::map<std::string, MatchCounts> out;
  for (const auto& ty : types) {
    std::vector<EventRecord> p, g;
    for (const auto& r : predicted)
      if (r.event_type == ty) p.push_back(r);
    for (const auto& r : gold)
      if (r.event_type == ty) g.push_back(r);
    out[ty] = match_records(p, g);
  }
  return out;
}

inline EvalReport evaluate_predictions(const std::vector<std::vector<EventRecord>>& predicted,
                                       const Dataset& dataset) {
  std::vector<std::map<std::string, MatchCounts>> counts;
  for (std::size_t i = 0; i < dataset.docs.size(); ++i)
    counts.push_back(count_document(predicted[i], surface_records(dataset.docs[i])));
  return micro_prf(counts);
}

// Mean (over a document's records) of the number of distinct sentences that
// contain mentions of that record's argument entities.
inline double document_scatter(const AnnotatedDoc& ad) {
  if (ad.records.empty()) return 0.0;
  double total = 0.0;
  for (const auto& r : ad.records) {
    std::set<int> sents;
    for (const auto& [role, id] : r.args) {
      const Entity* e = ad.find_entity(id);
      if (!e) continue;
      for (const auto& m : e->mentions) sents.insert(m.sentence);
    }
    total += static_cast<double>(sents.size());
  }
  return total / static_cast<double>(ad.records.size());
}

struct ScatterQuartiles {
  std::vector<EvalReport> reports;          // four sets, ascending scatter
  std::vector<std::vector<int>> doc_sets;   // document indices per set
};

inline ScatterQuartiles scatter_quartiles(const std::vector<std::vector<EventRecord>>& predicted,
                                          const Dataset& dataset) {
  const int n = static_cast<int>(dataset.docs.size());
  std::vector<int> order(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  std::vector<double> scatter(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) scatter[static_cast<std::size_t>(i)] = document_scatter(dataset.docs[static_cast<std::size_t>(i)]);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return scatter[static_cast<std::size_t>(a)] < scatter[static_cast<std::size_t>(b)]; });

  ScatterQuartiles out;
  const int base = n / 4, rem = n % 4;
  int cursor = 0;
  for (int s = 0; s < 4; ++s) {
    int size = base + (s < rem ? 1 : 0);  // remainder goes to the earlier sets
    std::vector<int> docs(order.begin() + cursor, order.begin() + cursor + size);
    cursor += size;
    std::vector<std::map<std::string, MatchCounts>> counts;
    for (int di : docs)
      counts.push_back(count_document(predicted[static_cast<std::size_t>(di)],
                                      surface_records(dataset.docs[static_cast<std::size_t>(di)])));
    out.reports.push_back(micro_prf(counts));
    out.doc_sets.push_back(std::move(docs));
  }
  return out;
}

struct SingleMultiSplit {
  EvalReport single;  // documents with exactly one gold record
  EvalReport multi;   // documents with two or more
};

inline SingleMultiSplit single_multi_split(const std::vector<std::vector<EventRecord>>& predicted,
                                           const Dataset& dataset) {
  std::vector<std::map<std::string, MatchCounts>> s_counts, m_counts;
  for (std::size_t i = 0; i < dataset.docs.size(); ++i) {
    const std::size_t n_records = dataset.docs[i].records.size();
    if (n_records == 1)
      s_counts.push_back(count_document(predicted[i], surface_records(dataset.docs[i])));
    else if (n_records >= 2)
      m_counts.push_back(count_document(predicted[i], surface_records(dataset.docs[i])));
  }
  return {micro_prf(s_counts), micro_prf(m_counts)};
}

// One wide row: per-type P/R/F1 column triplets followed by the micro Avg.
inline void write_report_tsv(const EvalReport& rep, std::ostream& out, const std::string& row_label = "model") {
  out << "label";
  for (const auto& [ty, row] : rep.per_type) out << '\t' << ty << "_P\t" << ty << "_R\t" << ty << "_F1";
  out << "\tAvg_P\tAvg_R\tAvg_F1\n";
  out << row_label;
  for (const auto& [ty, row] : rep.per_type) out << '\t' << row.p << '\t' << row.r << '\t' << row.f1;
  out << '\t' << rep.micro.p << '\t' << rep.micro.r << '\t' << rep.micro.f1 << '\n';
}

// F1 per scatter set, ascending: columns I..IV.
inline void write_quartiles_tsv(const ScatterQuartiles& q, std::ostream& out) {
  out << "I\tII\tIII\tIV\n";
  for (std::size_t i = 0; i < q.reports.size(); ++i) out << (i ? "\t" : "") << q.reports[i].micro.f1;
  out << '\n';
}

// Single/multi event document split: S., M., and the combined column.
inline void write_single_multi_tsv(const SingleMultiSplit& sm, const EvalReport& overall, std::ostream& out) {
  out << "S\tM\tS&M\n";
  out << (sm.single.empty_marked() ? std::string("n/a") : std::to_string(sm.single.micro.f1)) << '\t'
      << (sm.multi.empty_marked() ? std::string("n/a") : std::to_string(sm.multi.micro.f1)) << '\t'
      << overall.micro.f1 << '\n';
}

}  // namespace redee
