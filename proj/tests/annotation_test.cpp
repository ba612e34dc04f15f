#include <gtest/gtest.h>

#include <random>
#include <thread>

#include "oracles.hpp"
#include "pclkit/annotation.hpp"
#include "test_support.hpp"

using namespace pclkit;

namespace {

std::vector<Document> make_docs(int n) {
  std::vector<Document> docs;
  for (int i = 0; i < n; ++i) {
    Document d;
    d.id = "d" + std::to_string(100 + i);
    d.text = "document " + std::to_string(i);
    docs.push_back(d);
  }
  return docs;
}

std::vector<Annotator> team(int primaries) {
  std::vector<Annotator> a;
  for (int i = 0; i < primaries; ++i) a.push_back({"p" + std::to_string(i), AnnotatorRole::PRIMARY});
  a.push_back({"proof", AnnotatorRole::PROOFREADER});
  return a;
}

LabelRecord rec(const std::string& doc, bool pcl, Intensity in = Intensity::MODERATE,
                std::set<Subcategory> subs = {Subcategory::APPEAL}) {
  LabelRecord r;
  r.doc_id = doc;
  r.pcl = pcl;
  if (pcl) {
    r.subcategories = std::move(subs);
    r.intensity = in;
  }
  return r;
}

SessionError::Kind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const SessionError& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no SessionError";
  return SessionError::Kind::INVALID_LABEL;
}

}  // namespace

TEST(Kappa, KnownValues) {
  std::vector<bool> a = {true, true, false, false};
  EXPECT_DOUBLE_EQ(cohen_kappa(a, a), 1.0);
  EXPECT_DOUBLE_EQ(cohen_kappa(a, {false, false, true, true}), -1.0);
  EXPECT_DOUBLE_EQ(cohen_kappa({true, true, false, false}, {true, false, false, false}), 0.5);
  EXPECT_THROW(cohen_kappa({true, true}, {true, true}), UndefinedResult);
  EXPECT_THROW(cohen_kappa({}, {}), ValidationError);
  EXPECT_THROW(cohen_kappa({true}, {true, false}), ValidationError);
}

TEST(Kappa, SymmetricAndMatchesTableOracle) {
  std::mt19937_64 rng(9);
  for (int round = 0; round < 300; ++round) {
    const int n = 2 + int(rng() % 200);
    std::vector<bool> a, b;
    for (int i = 0; i < n; ++i) {
      a.push_back(rng() % 3 == 0);
      b.push_back(rng() % 2 == 0);
    }
    double k;
    try {
      k = cohen_kappa(a, b);
    } catch (const UndefinedResult&) {
      continue;
    }
    ASSERT_NEAR(k, oracle::kappa(a, b), 1e-12);
    ASSERT_DOUBLE_EQ(k, cohen_kappa(b, a));
  }
}

TEST(Kappa, WeakRemovedExceedsAllOnFixture) {
  auto pairs = label_pairs(load_labels(test::source_path("tests/fixtures/kappa_disagreement.jsonl")));
  ASSERT_EQ(pairs.size(), 40u);
  std::vector<bool> a, b;
  for (const auto& [x, y] : pairs) {
    a.push_back(x.pcl);
    b.push_back(y.pcl);
  }
  auto report = compute_iaa(pairs);
  ASSERT_TRUE(report.kappa_all);
  EXPECT_NEAR(*report.kappa_all, oracle::kappa(a, b), 1e-12);
  ASSERT_TRUE(report.kappa_weak_removed && *report.kappa_weak_removed);
  EXPECT_GT(**report.kappa_weak_removed, *report.kappa_all);
  EXPECT_EQ(report.n_removed_weak, 8u);
  EXPECT_EQ(report.n_items, 40u);
}

TEST(Kappa, PerSubcategoryOverBothPositiveItems) {
  std::vector<LabelPair> pairs;
  auto add = [&](bool pa, std::set<Subcategory> sa, bool pb, std::set<Subcategory> sb) {
    const std::string id = "k" + std::to_string(pairs.size());
    pairs.emplace_back(rec(id, pa, Intensity::SEVERE, sa), rec(id, pb, Intensity::SEVERE, sb));
  };
  using S = Subcategory;
  add(true, {S::APPEAL}, true, {S::APPEAL});
  add(true, {S::APPEAL, S::PREJUDICE}, true, {S::APPEAL});
  add(true, {S::PREJUDICE}, true, {S::PREJUDICE});
  add(true, {S::SPECTATOR}, true, {S::PREJUDICE});
  add(false, {}, true, {S::COMPASSION});  // excluded: not both positive
  auto k = kappa_per_subcategory(pairs);
  EXPECT_DOUBLE_EQ(*k.at(S::APPEAL), oracle::kappa({1, 1, 0, 0}, {1, 1, 0, 0}));
  EXPECT_NEAR(*k.at(S::PREJUDICE), oracle::kappa({0, 1, 1, 0}, {0, 0, 1, 1}), 1e-12);
  EXPECT_FALSE(k.at(S::COMPASSION).has_value());
  EXPECT_FALSE(k.at(S::UNBALANCED_POWER).has_value());
  auto text = render_iaa(compute_iaa(pairs));
  EXPECT_NE(text.find("undefined"), std::string::npos);
  EXPECT_EQ(text.find("Remove Weak"), std::string::npos);  // no MILD labels here
}

TEST(Session, AssignmentIsBalancedAndSeeded) {
  for (int primaries : {2, 3, 5}) {
    auto s = create_session("s", make_docs(37), team(primaries), 4);
    std::map<std::string, std::size_t> load;
    for (const auto& [doc, pair] : s.assignment) {
      EXPECT_NE(pair[0], pair[1]);
      ++load[pair[0]];
      ++load[pair[1]];
    }
    std::size_t lo = SIZE_MAX, hi = 0;
    for (const auto& [a, n] : load) {
      lo = std::min(lo, n);
      hi = std::max(hi, n);
      EXPECT_EQ(s.workload(a), n);
    }
    EXPECT_EQ(load.size(), std::size_t(primaries));
    EXPECT_LE(hi - lo, 1u);
    EXPECT_EQ(s, create_session("s", make_docs(37), team(primaries), 4));
  }
  EXPECT_THROW(create_session("s", make_docs(3), team(1), 1), ValidationError);
}

TEST(Session, SubmissionGatingAndPermissions) {
  AnnotationSession session(create_session("s", make_docs(4), team(3), 1));
  auto st = session.snapshot();
  const auto& doc = st.docs[0].id;
  const auto [a, b] = st.assignment.at(doc);
  std::string outsider;
  for (auto p : {"p0", "p1", "p2"})
    if (p != a && p != b) outsider = p;
  using K = SessionError::Kind;
  EXPECT_EQ(kind_of([&] { session.submit("ghost", rec(doc, true)); }), K::UNKNOWN_ANNOTATOR);
  EXPECT_EQ(kind_of([&] { session.submit("proof", rec(doc, true)); }), K::FORBIDDEN);
  EXPECT_EQ(kind_of([&] { session.submit(a, rec("nope", true)); }), K::UNKNOWN_DOCUMENT);
  EXPECT_EQ(kind_of([&] { session.submit(outsider, rec(doc, true)); }), K::NOT_ASSIGNED);
  auto forged = rec(doc, true);
  forged.annotator_id = b;
  EXPECT_EQ(kind_of([&] { session.submit(a, forged); }), K::FORBIDDEN);
  auto bad = rec(doc, true);
  bad.subcategories.clear();
  EXPECT_EQ(kind_of([&] { session.submit(a, bad); }), K::INVALID_LABEL);
  EXPECT_EQ(kind_of([&] { session.resolve("proof", rec(doc, true)); }), K::NOT_READY);

  EXPECT_EQ(next_task(session.snapshot(), a), doc);
  EXPECT_EQ(session.submit(a, rec(doc, true)).annotator_id, a);
  EXPECT_NE(next_task(session.snapshot(), a), doc);
  EXPECT_EQ(session.snapshot().status(doc, a), TaskStatus::SUBMITTED);

  session.submit(b, rec(doc, false));
  auto queue = adjudication_queue(session.snapshot());
  ASSERT_EQ(queue.size(), 1u);
  EXPECT_EQ(queue[0].conflict_fields.front(), "pcl");
  EXPECT_EQ(kind_of([&] { session.resolve(a, rec(doc, true)); }), K::FORBIDDEN);
  auto fin = session.resolve("proof", rec(doc, true));
  EXPECT_EQ(fin.round, Round::PROOFREAD);
  EXPECT_TRUE(adjudication_queue(session.snapshot()).empty());
  EXPECT_EQ(kind_of([&] { session.submit(a, rec(doc, false)); }), K::LOCKED);

  session.lock();
  const auto& other = st.docs[1].id;
  EXPECT_EQ(kind_of([&] { session.submit(st.assignment.at(other)[0], rec(other, true)); }), K::LOCKED);
}

TEST(Session, AgreementFinalizesWithoutProofreader) {
  AnnotationSession session(create_session("s", make_docs(2), team(2), 3));
  const auto doc = session.snapshot().docs[0].id;
  session.submit("p0", rec(doc, true));
  session.submit("p1", rec(doc, true));
  auto st = session.snapshot();
  EXPECT_TRUE(st.final_labels.count(doc));
  EXPECT_TRUE(adjudication_queue(st).empty());
  session.submit("p1", rec(doc, false));  // resubmission reopens the conflict
  EXPECT_FALSE(session.snapshot().final_labels.count(doc));
  EXPECT_EQ(adjudication_queue(session.snapshot()).size(), 1u);
}

TEST(Session, QueueMatchesBruteForce) {
  std::mt19937_64 rng(21);
  AnnotationSession session(create_session("s", make_docs(60), team(4), 8));
  const auto st = session.snapshot();
  for (const auto& [doc, pair] : st.assignment)
    for (const auto& who : pair)
      if (rng() % 5 != 0) session.submit(who, rec(doc, rng() % 2 == 0, Intensity(1 + rng() % 3)));
  auto now = session.snapshot();
  std::vector<std::string> want;
  for (const auto& d : now.docs) {
    const auto& pair = now.assignment.at(d.id);
    auto x = now.submissions.find({d.id, pair[0]});
    auto y = now.submissions.find({d.id, pair[1]});
    if (x == now.submissions.end() || y == now.submissions.end()) continue;
    if (x->second.pcl != y->second.pcl || x->second.intensity != y->second.intensity) want.push_back(d.id);
  }
  std::vector<std::string> got;
  for (const auto& item : adjudication_queue(now)) got.push_back(item.doc_id);
  EXPECT_EQ(got, want);
  EXPECT_FALSE(want.empty());
}

TEST(Session, PersistenceRoundTrip) {
  test::TempDir dir;
  AnnotationSession session(create_session("s", make_docs(6), team(2), 2));
  const auto doc = session.snapshot().docs[0].id;
  session.submit("p0", rec(doc, true, Intensity::MILD));
  session.submit("p1", rec(doc, false));
  session.resolve("proof", rec(doc, true, Intensity::MILD));
  session.lock();
  const auto path = dir / "s.session.json";
  save_session(session.snapshot(), path);
  EXPECT_EQ(load_session(path), session.snapshot());
  EXPECT_EQ(export_labels(session.snapshot()).size(), 3u);
}

TEST(Session, ConcurrentSubmissionsKeepEveryLabel) {
  AnnotationSession session(create_session("s", make_docs(200), team(4), 5));
  const auto st = session.snapshot();
  std::vector<std::thread> threads;
  for (const auto& a : {"p0", "p1", "p2", "p3"}) {
    threads.emplace_back([&, who = std::string(a)] {
      for (const auto& [doc, pair] : st.assignment)
        if (pair[0] == who || pair[1] == who) session.submit(who, rec(doc, who < "p2"));
    });
  }
  for (auto& t : threads) t.join();
  auto end = session.snapshot();
  EXPECT_EQ(end.submissions.size(), 400u);
  EXPECT_TRUE(end.is_complete() || !adjudication_queue(end).empty());
  for (const auto& d : end.docs) EXPECT_EQ(end.pair_for(d.id).has_value(), true);
}

TEST(Kappa, PerSubcategoryIdenticalSetsAndPermutationInvariance) {
  using S = Subcategory;
  std::mt19937_64 rng(4);
  const auto all = all_values<Subcategory>();
  std::vector<LabelPair> same, mixed;
  for (int i = 0; i < 60; ++i) {
    const std::string id = "s" + std::to_string(i);
    std::set<S> sa, sb;
    for (auto s : all) {
      if (rng() % 2) sa.insert(s);
      if (rng() % 2) sb.insert(s);
    }
    if (sa.empty()) sa.insert(S::APPEAL);
    if (sb.empty()) sb.insert(S::SPECTATOR);
    same.emplace_back(rec(id, true, Intensity::SEVERE, sa), rec(id, true, Intensity::SEVERE, sa));
    mixed.emplace_back(rec(id, true, Intensity::SEVERE, sa), rec(id, true, Intensity::SEVERE, sb));
  }
  for (const auto& [s, k] : kappa_per_subcategory(same)) EXPECT_EQ(k, 1.0) << to_string(s);
  auto before = kappa_per_subcategory(mixed);
  std::shuffle(mixed.begin(), mixed.end(), rng);
  auto after = kappa_per_subcategory(mixed);
  for (auto s : all) {
    ASSERT_TRUE(before.at(s) && after.at(s));
    EXPECT_NEAR(*before.at(s), *after.at(s), 1e-12);
  }
}
