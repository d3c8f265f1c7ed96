#include <catch2/catch_amalgamated.hpp>

#include <set>

#include "helpers.hpp"
#include "redee/dependency.hpp"
#include "redee/grad_check.hpp"
#include "redee/raat.hpp"
#include "redee/synth.hpp"

using namespace redee;
using Catch::Approx;

namespace {

EventOntology two_role_ontology() {
  EventOntology onto;
  onto.entity_types = {"ORG"};
  onto.event_types.push_back({"Pledge", {"Pledger", "Pledgee"}, {}});
  return onto;
}

// Independent re-derivation of every channel from first principles; the
// production builder must match entry for entry.
std::vector<Tensor> reference_channels(const std::vector<DepNode>& nodes,
                                       const std::vector<RelationTriple>& triples,
                                       const RelationSchema& schema) {
  const int n = static_cast<int>(nodes.size());
  const int c = 3 + schema.num_clusters();
  std::vector<Tensor> ch(static_cast<std::size_t>(c), Tensor({n, n}));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      const DepNode &a = nodes[static_cast<std::size_t>(i)], &b = nodes[static_cast<std::size_t>(j)];
      if (!a.is_sentence && !b.is_sentence && !a.entity_id.empty() && a.entity_id == b.entity_id)
        ch[1].at(i, j) = 1;
      if (!a.is_sentence && b.is_sentence &&
          std::count(a.sentences.begin(), a.sentences.end(), b.sentence_index))
        ch[2].at(i, j) = ch[2].at(j, i) = 1;
      for (const auto& tr : triples) {
        if (a.is_sentence || b.is_sentence) continue;
        if (a.entity_id == tr.head && b.entity_id == tr.tail)
          ch[static_cast<std::size_t>(3 + schema.head_cluster.at(tr.relation))].at(i, j) = 1;
      }
    }
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      double any = 0;
      for (int k = 1; k < c; ++k) any += ch[static_cast<std::size_t>(k)].at(i, j);
      ch[0].at(i, j) = (i == j || any == 0) ? 1 : 0;
    }
  return ch;
}

void check_invariants(const DependencyTensor& t) {
  const int n = t.n;
  // exclusivity: NA=1 iff all other channels zero
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      double others = 0;
      for (int c = 1; c < t.channel_count(); ++c) others += t.channels[static_cast<std::size_t>(c)].at(i, j);
      REQUIRE(t.channels[0].at(i, j) == (others == 0 ? 1.0 : 0.0));
    }
  // symmetry of co-reference and co-existence
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      REQUIRE(t.channels[1].at(i, j) == t.channels[1].at(j, i));
      REQUIRE(t.channels[2].at(i, j) == t.channels[2].at(j, i));
    }
}

}  // namespace

TEST_CASE("five-node fixture matches the hand-derived tensor exactly") {
  EventOntology onto = two_role_ontology();
  RelationSchema schema = derive_relation_schema(onto);
  REQUIRE(schema.num_clusters() == 1);

  std::vector<TaggedMention> mentions = {
      {{0, 0, 1, "a"}, "A", "ORG"},  // a1 in s0
      {{1, 0, 1, "a"}, "A", "ORG"},  // a2 in s1
      {{1, 1, 2, "b"}, "B", "ORG"},  // b1 in s1
  };
  NodeIndex ni = NodeIndex::for_document(mentions, 2);
  REQUIRE(ni.size() == 5);  // [a1, a2, b1, s0, s1]
  DependencyTensor t = build_document_tensor(ni, {{"A", "B", "Pledger2Pledgee"}}, schema);
  REQUIRE(t.channel_count() == 4);

  auto expect = [&](int c, std::set<std::pair<int, int>> want) {
    for (int i = 0; i < 5; ++i)
      for (int j = 0; j < 5; ++j) {
        double v = t.channels[static_cast<std::size_t>(c)].at(i, j);
        REQUIRE(v == (want.count({i, j}) ? 1.0 : 0.0));
      }
  };
  expect(DependencyTensor::kCoref, {{0, 1}, {1, 0}});
  expect(DependencyTensor::kCoexist, {{0, 3}, {3, 0}, {1, 4}, {4, 1}, {2, 4}, {4, 2}});
  expect(DependencyTensor::kRelBase, {{0, 2}, {1, 2}});
  // NA everywhere else, including the diagonal and the sentence-sentence pair
  std::set<std::pair<int, int>> na;
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 5; ++j) na.insert({i, j});
  for (auto p : std::set<std::pair<int, int>>{{0, 1}, {1, 0}, {0, 3}, {3, 0}, {1, 4}, {4, 1},
                                              {2, 4}, {4, 2}, {0, 2}, {1, 2}})
    na.erase(p);
  expect(DependencyTensor::kNa, na);
  REQUIRE(t.channels[DependencyTensor::kNa].at(3, 4) == 1.0);

  check_invariants(t);

  // sparse dump carries every set entry with its channel name
  std::string dump = t.dump_sparse();
  REQUIRE(dump.find("Co-relation[Pledger]\t0\t2") != std::string::npos);
  REQUIRE(dump.find("Co-reference\t0\t1") != std::string::npos);
}

TEST_CASE("head = tail triple sets both co-relation and co-reference") {
  EventOntology onto;
  onto.entity_types = {"DATE"};
  onto.event_types.push_back({"Span", {"StartDate", "EndDate"}, {}});
  RelationSchema schema = derive_relation_schema(onto);

  std::vector<TaggedMention> mentions = {
      {{0, 0, 1, "d"}, "D", "DATE"},
      {{1, 0, 1, "d"}, "D", "DATE"},
  };
  NodeIndex ni = NodeIndex::for_document(mentions, 2);
  DependencyTensor t = build_document_tensor(ni, {{"D", "D", "StartDate2EndDate"}}, schema);
  REQUIRE(t.channels[DependencyTensor::kCoref].at(0, 1) == 1.0);
  REQUIRE(t.channels[DependencyTensor::kRelBase].at(0, 1) == 1.0);
  REQUIRE(t.channels[DependencyTensor::kRelBase].at(1, 0) == 1.0);
  REQUIRE(t.channels[DependencyTensor::kNa].at(0, 1) == 0.0);
  check_invariants(t);
}

TEST_CASE("no triples, one mention: only co-existence and NA") {
  EventOntology onto = two_role_ontology();
  RelationSchema schema = derive_relation_schema(onto);
  NodeIndex ni = NodeIndex::for_document({{{0, 0, 1, "x"}, "X", "ORG"}}, 1);
  DependencyTensor t = build_document_tensor(ni, {}, schema);
  REQUIRE(t.channels[DependencyTensor::kCoexist].at(0, 1) == 1.0);
  REQUIRE(t.channels[DependencyTensor::kCoref].max_abs_diff(Tensor({2, 2})) == 0.0);
  REQUIRE(t.channels[DependencyTensor::kRelBase].max_abs_diff(Tensor({2, 2})) == 0.0);
  check_invariants(t);
}

TEST_CASE("triple citing an entity without mention nodes is an error") {
  EventOntology onto = two_role_ontology();
  RelationSchema schema = derive_relation_schema(onto);
  NodeIndex ni = NodeIndex::for_document({{{0, 0, 1, "x"}, "X", "ORG"}}, 1);
  REQUIRE_THROWS_AS(build_document_tensor(ni, {{"X", "GHOST", "Pledger2Pledgee"}}, schema), DataError);
}

TEST_CASE("invariants and reference equality hold on 200 random synthetic documents") {
  EventOntology onto = default_synth_ontology();
  RelationSchema schema = derive_relation_schema(onto);
  SynthConfig cfg;
  cfg.num_docs = 200;
  cfg.seed = 99;
  cfg.shared_argument_prob = 0.7;
  Dataset ds = generate_synthetic_corpus(cfg, onto);
  for (const auto& ad : ds.docs) {
    auto mentions = resolve_mentions(ad.entities);
    auto triples_set = derive_gold_relations(ad.records, onto, schema);
    std::vector<RelationTriple> triples(triples_set.begin(), triples_set.end());
    NodeIndex ni = NodeIndex::for_document(mentions, static_cast<int>(ad.doc.sentences.size()));
    DependencyTensor t = build_document_tensor(ni, triples, schema);
    REQUIRE(t.channel_count() == 3 + schema.num_clusters());
    check_invariants(t);
    // sentence-sentence pairs carry only NA
    for (int i = ni.num_mentions; i < ni.size(); ++i)
      for (int j = ni.num_mentions; j < ni.size(); ++j)
        for (int c = 1; c < t.channel_count(); ++c)
          REQUIRE(t.channels[static_cast<std::size_t>(c)].at(i, j) == 0.0);
    auto ref = reference_channels(ni.nodes, triples, schema);
    for (int c = 0; c < t.channel_count(); ++c)
      REQUIRE(t.channels[static_cast<std::size_t>(c)].max_abs_diff(ref[static_cast<std::size_t>(c)]) == 0.0);
  }
}

TEST_CASE("cluster count equals distinct head roles on randomized ontologies") {
  std::mt19937_64 rng(4242);
  for (int rep = 0; rep < 25; ++rep) {
    EventOntology onto;
    onto.entity_types = {"T"};
    std::uniform_int_distribution<int> n_types(1, 4), n_roles(1, 6), pick(0, 9);
    int types = n_types(rng);
    for (int e = 0; e < types; ++e) {
      EventTypeDef et;
      et.name = "E" + std::to_string(e);
      std::set<std::string> used;
      int roles = n_roles(rng);
      for (int r = 0; r < roles; ++r) used.insert("R" + std::to_string(pick(rng)));
      et.roles.assign(used.begin(), used.end());
      onto.event_types.push_back(et);
    }
    RelationSchema schema = derive_relation_schema(onto);
    std::set<std::string> heads;  // every role that precedes another role
    for (const auto& et : onto.event_types)
      for (std::size_t i = 0; i + 1 < et.roles.size(); ++i) heads.insert(et.roles[i]);
    REQUIRE(schema.num_clusters() == static_cast<int>(heads.size()));
  }
}

TEST_CASE("mirrored co-relation sets the transpose too") {
  EventOntology onto = two_role_ontology();
  RelationSchema schema = derive_relation_schema(onto);
  std::vector<TaggedMention> mentions = {
      {{0, 0, 1, "a"}, "A", "ORG"},
      {{0, 1, 2, "b"}, "B", "ORG"},
  };
  NodeIndex ni = NodeIndex::for_document(mentions, 1);
  DependencyTensor plain = build_document_tensor(ni, {{"A", "B", "Pledger2Pledgee"}}, schema, false);
  REQUIRE(plain.channels[DependencyTensor::kRelBase].at(0, 1) == 1.0);
  REQUIRE(plain.channels[DependencyTensor::kRelBase].at(1, 0) == 0.0);
  DependencyTensor mirrored = build_document_tensor(ni, {{"A", "B", "Pledger2Pledgee"}}, schema, true);
  REQUIRE(mirrored.channels[DependencyTensor::kRelBase].at(1, 0) == 1.0);
  check_invariants(mirrored);
}

TEST_CASE("construction counter tracks builds") {
  EventOntology onto = two_role_ontology();
  RelationSchema schema = derive_relation_schema(onto);
  NodeIndex ni = NodeIndex::for_document({{{0, 0, 1, "x"}, "X", "ORG"}}, 1);
  long before = DependencyTensor::build_counter().load();
  build_document_tensor(ni, {}, schema);
  build_document_tensor(ni, {}, schema);
  REQUIRE(DependencyTensor::build_counter().load() == before + 2);
}

namespace {

std::vector<Tensor> na_only_masks(int n, int channels) {
  std::vector<Tensor> masks(static_cast<std::size_t>(channels), Tensor({n, n}));
  masks[0] = Tensor::full({n, n}, 1.0);
  return masks;
}

}  // namespace

TEST_CASE("reduction: zeroed relation channels and M = bias = 0 give vanilla attention") {
  std::mt19937_64 rng(77);
  const int n = 6, d = 8, channels = 4, heads = 2;
  ParamStore ps;
  std::mt19937_64 init(78);
  init_raat_block(ps, "r", d, 12, channels, init);
  for (int c = 0; c < channels; ++c) {
    auto& m = ps.value("r/m" + std::to_string(c));
    std::fill(m.data.begin(), m.data.end(), 0.0);
  }
  Tensor x = testutil::random_tensor({n, d}, rng);
  auto masks = na_only_masks(n, channels);

  Tape t;
  auto xv = t.constant(x);
  auto raat_out = raat_attention(t, ps, "r", xv, masks, heads);
  auto vanilla = attention(t, xv, t.param(ps, "r/wq"), t.param(ps, "r/wk"), t.param(ps, "r/wv"), heads);
  REQUIRE(raat_out->value.max_abs_diff(vanilla->value) <= 1e-10);
}

TEST_CASE("single node: softmax over one score returns the value row") {
  ParamStore ps;
  std::mt19937_64 init(5);
  init_raat_block(ps, "r", 4, 8, 2, init);
  std::mt19937_64 rng(6);
  Tensor x = testutil::random_tensor({1, 4}, rng);
  auto masks = na_only_masks(1, 2);
  Tape t;
  auto out = raat_attention(t, ps, "r", t.constant(x), masks, 1);
  auto v = t.matmul(t.constant(x), t.param(ps, "r/wv"));
  REQUIRE(out->value.max_abs_diff(v->value) <= 1e-12);
}

TEST_CASE("zero-layer encode is the identity") {
  ParamStore ps;
  std::mt19937_64 rng(9);
  Tensor x = testutil::random_tensor({4, 6}, rng);
  Tape t;
  auto out = raat_encode(t, ps, "r", 0, t.constant(x), na_only_masks(4, 2), 2);
  REQUIRE(out->value.max_abs_diff(x) == 0.0);
}

TEST_CASE("one raat layer with inert channels equals one vanilla block") {
  const int d = 6, ff = 10, channels = 3, heads = 2, n = 5;
  ParamStore ps;
  std::mt19937_64 init(31);
  init_raat_block(ps, "r/l0", d, ff, channels, init);
  for (int c = 0; c < channels; ++c) {
    auto& m = ps.value("r/l0/m" + std::to_string(c));
    std::fill(m.data.begin(), m.data.end(), 0.0);
  }
  // vanilla twin sharing the attention/ff/ln weights
  ParamStore vanilla;
  for (const auto& suffix : {"wq", "wk", "wv", "ln1_g", "ln1_b", "ff_w1", "ff_b1", "ff_w2", "ff_b2",
                             "ln2_g", "ln2_b"})
    vanilla.add(std::string("v/l0/") + suffix, ps.value(std::string("r/l0/") + suffix));
  std::mt19937_64 rng(32);
  Tensor x = testutil::random_tensor({n, d}, rng);
  Tape t;
  auto raat_out = raat_encode(t, ps, "r", 1, t.constant(x), na_only_masks(n, channels), heads);
  auto vanilla_out = encode(t, vanilla, "v", 1, t.constant(x), heads);
  REQUIRE(raat_out->value.max_abs_diff(vanilla_out->value) <= 1e-10);
}

TEST_CASE("raat gradients pass finite differences", "[grad]") {
  std::mt19937_64 rng(55);
  const int n = 5, d = 4, channels = 3, heads = 2;
  // random but valid masks: NA + two structure channels
  std::vector<Tensor> masks(channels, Tensor({n, n}));
  std::uniform_int_distribution<int> coin(0, 3);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (i == j) {
        masks[0].at(i, j) = 1;
        continue;
      }
      int pick = coin(rng);
      if (pick >= 2) masks[0].at(i, j) = 1;
      else masks[static_cast<std::size_t>(1 + pick)].at(i, j) = 1;
    }

  ParamStore ps;
  std::mt19937_64 init(56);
  init_raat_block(ps, "r/l0", d, 6, channels, init);
  // nonzero channel biases so their gradient path is exercised
  for (int c = 0; c < channels; ++c) ps.value("r/l0/bias").at(c) = 0.1 * (c + 1);
  ps.add("x", testutil::random_tensor({n, d}, rng));

  auto eval = [&](bool accumulate) {
    Tape t;
    auto out = raat_encode(t, ps, "r", 1, t.param(ps, "x"), masks, heads);
    auto loss = testutil::scalarize(t, out);
    double v = loss->value.at(0);
    if (accumulate) t.backward(loss);
    return v;
  };
  auto report = grad_check(ps, eval);
  REQUIRE(report.max_err <= 1e-4);
  // every relation-augmentation parameter was actually checked
  std::set<std::string> names;
  for (const auto& e : report.entries) names.insert(e.name);
  for (const auto& want : {"r/l0/wrq", "r/l0/wrk", "r/l0/m0", "r/l0/m1", "r/l0/m2", "r/l0/bias",
                           "r/l0/wq", "r/l0/wk", "r/l0/wv"})
    REQUIRE(names.count(want) == 1);
}

TEST_CASE("permutation equivariance of raat encoding") {
  EventOntology onto = default_synth_ontology();
  RelationSchema schema = derive_relation_schema(onto);
  SynthConfig cfg;
  cfg.num_docs = 1;
  cfg.seed = 321;
  cfg.events_per_doc = {{2, 1.0}};
  Dataset ds = generate_synthetic_corpus(cfg, onto);
  const auto& ad = ds.docs[0];
  auto mentions = resolve_mentions(ad.entities);
  auto triples_set = derive_gold_relations(ad.records, onto, schema);
  std::vector<RelationTriple> triples(triples_set.begin(), triples_set.end());
  NodeIndex ni = NodeIndex::for_document(mentions, static_cast<int>(ad.doc.sentences.size()));
  DependencyTensor dt = build_document_tensor(ni, triples, schema);
  const int n = ni.size(), d = 8;

  ParamStore ps;
  std::mt19937_64 init(1000);
  init_raat_encoder(ps, "r", 2, d, 12, dt.channel_count(), init);
  std::mt19937_64 rng(1001);
  Tensor x = testutil::random_tensor({n, d}, rng);

  // random permutation
  std::vector<int> perm(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) perm[static_cast<std::size_t>(i)] = i;
  std::shuffle(perm.begin(), perm.end(), rng);

  Tensor xp({n, d});
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) xp.at(i, j) = x.at(perm[static_cast<std::size_t>(i)], j);
  std::vector<Tensor> masks_p;
  for (const auto& ch : dt.channels) {
    Tensor m({n, n});
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        m.at(i, j) = ch.at(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)]);
    masks_p.push_back(std::move(m));
  }

  Tape t;
  auto out = raat_encode(t, ps, "r", 2, t.constant(x), dt.channels, 2);
  auto out_p = raat_encode(t, ps, "r", 2, t.constant(xp), masks_p, 2);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j)
      REQUIRE(out_p->value.at(i, j) == Approx(out->value.at(perm[static_cast<std::size_t>(i)], j)).margin(1e-9));
}

TEST_CASE("one parameter set serves documents of different sizes") {
  ParamStore ps;
  std::mt19937_64 init(61);
  init_raat_encoder(ps, "r", 2, 6, 8, 3, init);
  std::mt19937_64 rng(62);
  for (int n : {3, 9}) {
    Tape t;
    auto out = raat_encode(t, ps, "r", 2, t.constant(testutil::random_tensor({n, 6}, rng)),
                           na_only_masks(n, 3), 2);
    REQUIRE(out->value.dim(0) == n);
    REQUIRE(out->value.dim(1) == 6);
  }
}
