#pragma once
// Relation-type counts per split, the TSV mirror of the corpus statistics
// table. Counts deduplicate identical triples within a document.

#include <algorithm>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "redee/dataset.hpp"
#include "redee/gold.hpp"

namespace redee {

struct RelationStats {
  // rows sorted descending by train count, ties by name
  std::vector<std::string> relation_types;
  std::map<std::string, std::map<std::string, long>> counts;  // relation -> split -> count
  std::vector<std::string> splits;
};

inline RelationStats relation_statistics(const std::vector<const Dataset*>& datasets, const EventOntology& onto,
                                         const RelationSchema& schema) {
  RelationStats st;
  for (const Dataset* ds : datasets) {
    st.splits.push_back(ds->split);
    for (const auto& ad : ds->docs)
      for (const auto& t : derive_gold_relations(ad.records, onto, schema))
        ++st.counts[t.relation][ds->split];
  }
  st.relation_types.assign(schema.relation_types.begin(), schema.relation_types.end());
  const std::string lead = st.splits.empty() ? std::string() : st.splits.front();
  std::stable_sort(st.relation_types.begin(), st.relation_types.end(),
                   [&](const std::string& a, const std::string& b) {
                     long ca = st.counts.count(a) ? st.counts[a][lead] : 0;
                     long cb = st.counts.count(b) ? st.counts[b][lead] : 0;
                     if (ca != cb) return ca > cb;
                     return a < b;
                   });
  return st;
}

inline void write_relation_stats_tsv(const RelationStats& st, std::ostream& out) {
  out << "# triples deduplicated per document (identical triples across records count once)\n";
  out << "relation_type";
  for (const auto& s : st.splits) out << '\t' << s;
  out << '\n';
  for (const auto& rel : st.relation_types) {
    out << rel;
    auto it = st.counts.find(rel);
    for (const auto& s : st.splits) {
      long c = 0;
      if (it != st.counts.end()) {
        auto jt = it->second.find(s);
        if (jt != it->second.end()) c = jt->second;
      }
      out << '\t' << c;
    }
    out << '\n';
  }
}

}  // namespace redee
