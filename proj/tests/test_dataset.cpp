// Synthetic data generation, class-disjoint partitioning with the local
// mix-in, and mini-batch iteration.

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <vector>

#include "meshlearn/dataset.hpp"
#include "oracles.hpp"

using namespace meshlearn;

namespace {

PartitionSpec three_agent_spec(double mixin) {
  PartitionSpec spec;
  spec.class_assignment = {{0, {0, 1, 2, 3}}, {1, {4, 5, 6}}, {2, {7, 8, 9}}};
  spec.mixin_fraction = mixin;
  return spec;
}

}  // namespace

TEST(GenerateBlobs, StratifiedSplitCounts) {
  const auto [train, test] = generate_blobs(10, 100, 8, 0.2, 7);
  EXPECT_EQ(train.size(), 800u);
  EXPECT_EQ(test.size(), 200u);
  EXPECT_EQ(train.dims(), 8u);
  EXPECT_EQ(train.n_classes, 10);
  EXPECT_EQ(train.split, Split::train);
  EXPECT_EQ(test.split, Split::test);
  std::map<int, int> train_counts, test_counts;
  for (int l : train.labels) ++train_counts[l];
  for (int l : test.labels) ++test_counts[l];
  for (int cls = 0; cls < 10; ++cls) {
    EXPECT_EQ(train_counts[cls], 80) << "class " << cls;
    EXPECT_EQ(test_counts[cls], 20) << "class " << cls;
  }
}

TEST(GenerateBlobs, ZeroSpreadCollapsesToUnitNormMeans) {
  const auto [train, test] = generate_blobs(4, 20, 6, 0.0, 11);
  // Every sample of a class is exactly the class mean, and the mean lies on
  // the unit sphere.
  for (std::size_t i = 0; i < train.size(); ++i) {
    double norm_sq = 0.0;
    for (std::size_t d = 0; d < train.dims(); ++d)
      norm_sq += train.features(i, d) * train.features(i, d);
    EXPECT_NEAR(std::sqrt(norm_sq), 1.0, 1e-12);
  }
  // A nearest-mean classifier is perfect on collapsed clusters.
  EXPECT_DOUBLE_EQ(oracle::nearest_mean_accuracy(train, test), 1.0);
}

TEST(GenerateBlobs, TightClustersAreLearnableByNearestMean) {
  const auto [train, test] = generate_blobs(10, 100, 16, 0.1, 3);
  EXPECT_GE(oracle::nearest_mean_accuracy(train, test), 0.99);
}

TEST(GenerateBlobs, SeedDeterminism) {
  const auto [train_a, test_a] = generate_blobs(5, 40, 4, 0.3, 17);
  const auto [train_b, test_b] = generate_blobs(5, 40, 4, 0.3, 17);
  const auto [train_c, test_c] = generate_blobs(5, 40, 4, 0.3, 18);
  EXPECT_TRUE(bit_equal(train_a.features, train_b.features));
  EXPECT_TRUE(bit_equal(test_a.features, test_b.features));
  EXPECT_EQ(train_a.labels, train_b.labels);
  EXPECT_FALSE(bit_equal(train_a.features, train_c.features));
}

TEST(GenerateBlobs, RejectsNonPositiveArguments) {
  EXPECT_THROW(generate_blobs(0, 10, 4, 0.1, 1), InputError);
  EXPECT_THROW(generate_blobs(3, 0, 4, 0.1, 1), InputError);
  EXPECT_THROW(generate_blobs(3, 10, 0, 0.1, 1), InputError);
  EXPECT_THROW(generate_blobs(3, 10, 4, -0.1, 1), InputError);
}

TEST(Partition, WithoutMixinPartitionsAreExactClassFilters) {
  const auto [train, test] = generate_blobs(10, 50, 4, 0.2, 5);
  const auto parts = partition_noniid(train, three_agent_spec(0.0), 9);
  ASSERT_EQ(parts.size(), 3u);

  std::set<int> all_indices;
  for (const auto& [agent_id, part] : parts) {
    EXPECT_EQ(part.owner, agent_id);
    for (int idx : part.indices) {
      EXPECT_TRUE(all_indices.insert(idx).second) << "index " << idx << " duplicated";
    }
  }
  const std::set<int> expected[3] = {{0, 1, 2, 3}, {4, 5, 6}, {7, 8, 9}};
  for (int agent = 0; agent < 3; ++agent) {
    for (int idx : parts.at(agent).indices)
      EXPECT_TRUE(expected[agent].count(train.labels[static_cast<std::size_t>(idx)]))
          << "agent " << agent << " sample " << idx;
    EXPECT_EQ(parts.at(agent).indices.size(), expected[agent].size() * 40u);
  }
}

TEST(Partition, MixinAddsTheExactArithmeticCount) {
  // 1250 samples/class -> 1000 train per class; the local agent owns four
  // classes (4000 samples), so a 5% mix-in adds exactly 200.
  const auto [train, test] = generate_blobs(10, 1250, 4, 0.25, 23);
  const auto parts = partition_noniid(train, three_agent_spec(0.05), 31);

  const DatasetPartition& local = parts.at(0);
  EXPECT_EQ(local.indices.size(), 4000u + 200u);

  // The added samples are unique, not previously owned, and therefore belong
  // to remote classes only.
  std::set<int> unique(local.indices.begin(), local.indices.end());
  EXPECT_EQ(unique.size(), local.indices.size());
  int mixin_count = 0;
  for (int idx : local.indices)
    if (train.labels[static_cast<std::size_t>(idx)] >= 4) ++mixin_count;
  EXPECT_EQ(mixin_count, 200);

  // Remote partitions are untouched by the mix-in.
  EXPECT_EQ(parts.at(1).indices.size(), 3000u);
  EXPECT_EQ(parts.at(2).indices.size(), 3000u);
}

TEST(Partition, MixinIsSeedDeterministic) {
  const auto [train, test] = generate_blobs(10, 100, 4, 0.2, 2);
  const auto a = partition_noniid(train, three_agent_spec(0.05), 77);
  const auto b = partition_noniid(train, three_agent_spec(0.05), 77);
  const auto c = partition_noniid(train, three_agent_spec(0.05), 78);
  EXPECT_EQ(a.at(0).indices, b.at(0).indices);
  EXPECT_NE(a.at(0).indices, c.at(0).indices);
}

TEST(Partition, RejectsOverlappingAssignmentsAndBadFractions) {
  const auto [train, test] = generate_blobs(10, 20, 4, 0.2, 2);
  PartitionSpec overlapping;
  overlapping.class_assignment = {{0, {0, 1}}, {1, {1, 2}}};
  EXPECT_THROW(partition_noniid(train, overlapping, 1), ConfigError);

  PartitionSpec out_of_range;
  out_of_range.class_assignment = {{0, {0, 10}}};
  EXPECT_THROW(partition_noniid(train, out_of_range, 1), ConfigError);

  PartitionSpec bad_fraction = three_agent_spec(1.0);
  EXPECT_THROW(partition_noniid(train, bad_fraction, 1), ConfigError);
}

TEST(Batches, OneEpochCoversThePartitionExactly) {
  const auto [train, test] = generate_blobs(6, 30, 4, 0.2, 13);
  PartitionSpec spec;
  spec.class_assignment = {{0, {0, 1, 2}}};
  const auto parts = partition_noniid(train, spec, 1);
  const DatasetPartition& part = parts.at(0);

  const auto batch_list = batches(train, part, 16, 99);
  // 3 classes x 24 train samples = 72 -> batches of 16,16,16,16,8.
  ASSERT_EQ(batch_list.size(), 5u);
  EXPECT_EQ(batch_list.back().labels.size(), 8u);

  // The multiset of emitted labels matches the partition's labels exactly.
  std::map<int, int> emitted, expected;
  std::size_t total = 0;
  for (const Batch& b : batch_list) {
    ASSERT_EQ(b.x.rows(), b.labels.size());
    for (int l : b.labels) ++emitted[l];
    total += b.labels.size();
  }
  for (int idx : part.indices) ++expected[train.labels[static_cast<std::size_t>(idx)]];
  EXPECT_EQ(total, part.indices.size());
  EXPECT_EQ(emitted, expected);
}

TEST(Batches, SingleOversizedBatchIsAPermutation) {
  const auto [train, test] = generate_blobs(3, 10, 4, 0.2, 3);
  PartitionSpec spec;
  spec.class_assignment = {{0, {0, 1, 2}}};
  const auto parts = partition_noniid(train, spec, 1);
  const auto batch_list = batches(train, parts.at(0), 1000, 5);
  ASSERT_EQ(batch_list.size(), 1u);
  EXPECT_EQ(batch_list[0].labels.size(), parts.at(0).indices.size());
}

TEST(Batches, EpochSeedControlsOrder) {
  const auto [train, test] = generate_blobs(4, 40, 4, 0.2, 29);
  PartitionSpec spec;
  spec.class_assignment = {{0, {0, 1, 2, 3}}};
  const auto parts = partition_noniid(train, spec, 1);
  const auto a = batches(train, parts.at(0), 8, 100);
  const auto b = batches(train, parts.at(0), 8, 100);
  const auto c = batches(train, parts.at(0), 8, 101);
  EXPECT_TRUE(bit_equal(a[0].x, b[0].x));
  EXPECT_EQ(a[0].labels, b[0].labels);
  EXPECT_FALSE(bit_equal(a[0].x, c[0].x));
}

TEST(Batches, RejectsBadInputs) {
  const auto [train, test] = generate_blobs(3, 10, 4, 0.2, 3);
  DatasetPartition empty;
  EXPECT_THROW(batches(train, empty, 8, 1), InputError);
  PartitionSpec spec;
  spec.class_assignment = {{0, {0}}};
  const auto parts = partition_noniid(train, spec, 1);
  EXPECT_THROW(batches(train, parts.at(0), 0, 1), InputError);
}

TEST(Subsample, KeepsTheFirstNOfEachClass) {
  const auto [train, test] = generate_blobs(4, 25, 4, 0.2, 19);
  const Dataset small = subsample_per_class(train, 7);
  std::map<int, int> counts;
  for (int l : small.labels) ++counts[l];
  for (int cls = 0; cls < 4; ++cls) EXPECT_EQ(counts[cls], 7) << "class " << cls;
  EXPECT_EQ(small.size(), 28u);
  EXPECT_EQ(small.n_classes, train.n_classes);
  EXPECT_THROW(subsample_per_class(train, 0), InputError);
}
