#include <gtest/gtest.h>

#include <set>

#include "pfk/dataset.hpp"
#include "test_support.hpp"

using namespace pfk;
using pfk_test::make_record;

namespace {

const std::string kHeader = "psn,class,fold,lpdb,l,ph,temp,f_type,ln_ku,beta_t,ln_kf\n";

}  // namespace

TEST(ParseRecords, HeaderAndOneRow) {
  const auto recs = parse_records(kHeader + "CI2,alpha+beta,CI-2 like,64,64,6.3,25,2S,-7.9,0.42,3.9\n");
  ASSERT_EQ(recs.size(), 1u);
  EXPECT_EQ(recs[0].psn, "CI2");
  EXPECT_EQ(recs[0].length, 64);
  EXPECT_EQ(recs[0].f_type, FoldType::two_state);
  EXPECT_DOUBLE_EQ(*recs[0].ln_kf, 3.9);
}

TEST(ParseRecords, EmptyBody) { EXPECT_TRUE(parse_records(kHeader).empty()); }

TEST(ParseRecords, PhOutOfRangeNamesColumn) {
  try {
    parse_records(kHeader + "X,alpha,f,10,20,15.0,25,2S,-1,0.5,1\n");
    FAIL() << "expected a validation error";
  } catch (const ValidationError& e) {
    EXPECT_EQ(e.field(), "ph");
    EXPECT_EQ(e.row(), 0u);
  }
}

TEST(ParseRecords, MalformedRowNamesRowAndColumn) {
  try {
    parse_records(kHeader + "A,alpha,f,10,20,7,25,2S,-1,0.5,1\nB,alpha,f,10,20,7\n");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.row(), 1u);
    EXPECT_EQ(e.field(), "temp");
  }
}

TEST(ParseRecords, NonNumericField) {
  EXPECT_THROW(parse_records(kHeader + "A,alpha,f,10,20,seven,25,2S,-1,0.5,1\n"), ParseError);
  EXPECT_THROW(parse_records(kHeader + "A,alpha,f,10.5,20,7,25,2S,-1,0.5,1\n"), ParseError);
}

TEST(ParseRecords, BadHeaderAndFoldType) {
  EXPECT_THROW(parse_records("psn,class\nA,b\n"), ParseError);
  EXPECT_THROW(parse_records(kHeader + "A,alpha,f,10,20,7,25,3S,-1,0.5,1\n"), ParseError);
}

TEST(ParseRecords, EmptyTargetIsInferenceRow) {
  const auto recs = parse_records(kHeader + "A,alpha,f,10,20,7,25,N2S,-1,0.5,\n");
  ASSERT_EQ(recs.size(), 1u);
  EXPECT_FALSE(recs[0].ln_kf.has_value());
}

TEST(ParseRecords, QuotedFieldsAndCrlf) {
  const auto recs = parse_records(kHeader + "\"A,1\",alpha,\"say \"\"hi\"\"\",10,20,7,25,2S,-1,0.5,1\r\n");
  ASSERT_EQ(recs.size(), 1u);
  EXPECT_EQ(recs[0].psn, "A,1");
  EXPECT_EQ(recs[0].fold, "say \"hi\"");
}

TEST(ParseRecords, WithoutHeader) {
  EXPECT_EQ(parse_records("A,alpha,f,10,20,7,25,2S,-1,0.5,1\n", false).size(), 1u);
}

TEST(Validate, Invariants) {
  auto r = make_record("A", 1.0);
  EXPECT_NO_THROW(validate(r));
  auto bad = r;
  bad.lpdb = 101;
  EXPECT_THROW(validate(bad), ValidationError);
  bad = r;
  bad.beta_t = 1.5;
  EXPECT_THROW(validate(bad), ValidationError);
  bad = r;
  bad.length = 0;
  bad.lpdb = 0;
  EXPECT_THROW(validate(bad), ValidationError);
  bad = r;
  bad.temp = -300;
  EXPECT_THROW(validate(bad), ValidationError);
}

TEST(SerializeRecords, RoundTrip) {
  const auto data = synthesize_dataset(120, 5);
  auto recs = data.records();
  recs[3].ln_kf.reset();
  recs[4].psn = "comma,name";
  EXPECT_EQ(parse_records(serialize_records(recs)), recs);
}

TEST(DatasetType, RejectsEmptyLabel) { EXPECT_THROW(Dataset({}, ""), ValidationError); }

TEST(SplitAb, AllTwoState) {
  Dataset d({make_record("a", 1), make_record("b", 2), make_record("c", 3)}, "d");
  const auto s = split_ab(d);
  EXPECT_EQ(s.a.size(), 3u);
  EXPECT_EQ(s.b.size(), 0u);
}

TEST(SplitAb, OneOfEach) {
  Dataset d({make_record("a", 1), make_record("b", 2, FoldType::non_two_state)}, "d");
  const auto s = split_ab(d);
  EXPECT_EQ(s.a.size(), 1u);
  EXPECT_EQ(s.b.size(), 1u);
  EXPECT_EQ(s.a.label(), "d-A");
}

TEST(SplitAb, CountsMatchFilterOracle) {
  std::vector<ProteinRecord> recs;
  for (int i = 0; i < 10; ++i)
    recs.push_back(make_record("p" + std::to_string(i), i, i < 6 ? FoldType::non_two_state : FoldType::two_state));
  const auto s = split_ab(Dataset(recs, "mix"));
  EXPECT_EQ(s.a.size(), 4u);
  EXPECT_EQ(s.b.size(), 6u);
}

TEST(SplitAb, PartitionProperty) {
  const auto data = synthesize_dataset(300, 11);
  const auto s = split_ab(data);
  EXPECT_EQ(s.a.size() + s.b.size(), data.size());
  std::set<std::string> a;
  for (const auto& r : s.a) a.insert(r.psn);
  for (const auto& r : s.b) EXPECT_FALSE(a.contains(r.psn));
  for (const auto& r : s.a) EXPECT_EQ(r.f_type, FoldType::two_state);
  for (const auto& r : s.b) EXPECT_EQ(r.f_type, FoldType::non_two_state);
}

TEST(SplitAb, CustomRuleAndDuplicateNames) {
  Dataset d({make_record("a", 1), make_record("b", 5)}, "d");
  const auto s = split_ab(d, [](const ProteinRecord& r) { return *r.ln_kf > 2; });
  EXPECT_EQ(s.a[0].psn, "b");
  Dataset dup({make_record("x", 1), make_record("x", 2, FoldType::non_two_state)}, "d");
  EXPECT_THROW(split_ab(dup), ValidationError);
}

TEST(Partition, TenRecords) {
  std::vector<ProteinRecord> recs;
  for (int i = 0; i < 10; ++i) recs.push_back(make_record("p" + std::to_string(i), i));
  const Dataset d(recs, "d");
  const auto p = train_test_partition(d, 0.2, 7);
  EXPECT_EQ(p.train.size(), 8u);
  EXPECT_EQ(p.test.size(), 2u);
  std::set<std::string> names;
  for (const auto& r : p.train) names.insert(r.psn);
  for (const auto& r : p.test) EXPECT_TRUE(names.insert(r.psn).second);
  EXPECT_EQ(names.size(), 10u);

  const auto again = train_test_partition(d, 0.2, 7);
  EXPECT_EQ(serialize_records(again.train.records()), serialize_records(p.train.records()));
  EXPECT_EQ(serialize_records(again.test.records()), serialize_records(p.test.records()));
}

TEST(Partition, TwoRecordsAndBadFraction) {
  const Dataset d({make_record("a", 1), make_record("b", 2)}, "d");
  const auto p = train_test_partition(d, 0.5, 0);
  EXPECT_EQ(p.train.size(), 1u);
  EXPECT_EQ(p.test.size(), 1u);
  EXPECT_THROW(train_test_partition(d, 0.0, 0), ValidationError);
  EXPECT_THROW(train_test_partition(d, 1.0, 0), ValidationError);
  EXPECT_THROW(train_test_partition(Dataset({make_record("a", 1)}, "d"), 0.5, 0), ValidationError);
}

TEST(Partition, ClampsToOneEachSide) {
  const auto d = synthesize_dataset(5, 0);
  EXPECT_EQ(train_test_partition(d, 0.01, 1).test.size(), 1u);
  EXPECT_EQ(train_test_partition(d, 0.99, 1).train.size(), 1u);
}

TEST(Synthesize, SingleRecord) {
  const auto d = synthesize_dataset(1, 0);
  ASSERT_EQ(d.size(), 1u);
  EXPECT_NO_THROW(validate(d[0]));
  EXPECT_THROW(synthesize_dataset(0, 0), ValidationError);
}

TEST(Synthesize, DeterministicAndValid) {
  const auto a = synthesize_dataset(200, 0);
  const auto b = synthesize_dataset(200, 0);
  EXPECT_EQ(a, b);
  EXPECT_NE(a, synthesize_dataset(200, 1));
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_NO_THROW(validate(a[i], i));
    ASSERT_TRUE(a[i].ln_kf.has_value());
  }
}

TEST(Synthesize, TargetFollowsDocumentedFunction) {
  // Residual of the documented generator must look like the stated noise.
  const auto d = synthesize_dataset(2000, 3);
  double ss = 0.0;
  for (const auto& r : d) {
    double effect = 0.0;
    for (const auto& f : synthetic::kFolds)
      if (f.fold == r.fold) effect = f.effect;
    const double tref = 298.15, t = r.temp + 273.15;
    const double ln_ku_ref = r.ln_ku + std::log(tref / t);
    const double expected = synthetic::ln_kf_at_reference(r.length, effect, r.f_type, r.beta_t, ln_ku_ref);
    const double resid = *r.ln_kf + std::log(tref / t) - expected;
    ss += resid * resid;
  }
  EXPECT_NEAR(std::sqrt(ss / d.size()), synthetic::kNoiseStd, 0.03);
}
