#include <cmath>
#include <set>

#include <gtest/gtest.h>

#include "flycl/philox.hpp"

using flycl::PhiloxStream;

TEST(Philox, KnownAnswerVectors) {
    // Random123 kat_vectors for philox4x32-10.
    EXPECT_EQ(flycl::philox4x32({0, 0, 0, 0}, {0, 0}),
              (flycl::PhiloxCounter{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u}));
    EXPECT_EQ(flycl::philox4x32({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu}, {0xffffffffu, 0xffffffffu}),
              (flycl::PhiloxCounter{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu}));
    EXPECT_EQ(flycl::philox4x32({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u}, {0xa4093822u, 0x299f31d0u}),
              (flycl::PhiloxCounter{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u}));
}

TEST(Philox, StreamEmitsBlockWordsInOrder) {
    PhiloxStream s(0, 0);
    const auto block = flycl::philox4x32({0, 0, 0, 0}, {0, 0});
    for (int i = 0; i < 4; ++i) EXPECT_EQ(s.next_u32(), block[i]);
    const auto next = flycl::philox4x32({1, 0, 0, 0}, {0, 0});
    EXPECT_EQ(s.next_u32(), next[0]);
}

TEST(Philox, SeedAndStreamSelectKeyAndCounter) {
    const std::uint64_t seed = 0x0123456789abcdefull, stream = 0xfedcba9876543210ull;
    PhiloxStream s(seed, stream);
    const auto block = flycl::philox4x32({0, 0, 0x76543210u, 0xfedcba98u}, {0x89abcdefu, 0x01234567u});
    const std::uint64_t expected = (static_cast<std::uint64_t>(block[0]) << 32) | block[1];
    EXPECT_EQ(s.next_u64(), expected);
}

TEST(Philox, DeterministicAndStreamsDiffer) {
    PhiloxStream a(42, 3), b(42, 3), c(42, 4), d(43, 3);
    bool differs_stream = false, differs_seed = false;
    for (int i = 0; i < 64; ++i) {
        const auto x = a.next_u32();
        EXPECT_EQ(x, b.next_u32());
        differs_stream |= x != c.next_u32();
        differs_seed |= x != d.next_u32();
    }
    EXPECT_TRUE(differs_stream);
    EXPECT_TRUE(differs_seed);
}

TEST(Philox, UniformIsInOpenUnitInterval) {
    PhiloxStream s(1, 1);
    double sum = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        const double u = s.next_uniform();
        ASSERT_GT(u, 0.0);
        ASSERT_LT(u, 1.0);
        sum += u;
    }
    EXPECT_NEAR(sum / n, 0.5, 5.0 * std::sqrt(1.0 / 12.0 / n));
}

TEST(Philox, NormalQuantileReferenceValues) {
    EXPECT_EQ(flycl::normal_quantile(0.5), 0.0);
    EXPECT_NEAR(flycl::normal_quantile(0.975), 1.959963984540054, 1e-14);
    EXPECT_NEAR(flycl::normal_quantile(0.025), -1.959963984540054, 1e-14);
    EXPECT_NEAR(flycl::normal_quantile(0.8413447460685429), 1.0, 1e-13);
    EXPECT_NEAR(flycl::normal_quantile(1e-10), -6.361340902404056, 1e-12);
    EXPECT_NEAR(flycl::normal_quantile(0.999), 3.090232306167813, 1e-13);
}

TEST(Philox, NormalQuantileIsOddAroundHalf) {
    // Dyadic p keep 1 - p exact.
    for (double p : {0x1p-40, 0x1p-20, 0x1p-7, 0.0625, 0.25, 0.375, 0.484375}) {
        EXPECT_NEAR(flycl::normal_quantile(p), -flycl::normal_quantile(1.0 - p),
                    1e-13 * std::max(1.0, std::fabs(flycl::normal_quantile(p))));
    }
}

TEST(Philox, NormalMomentsConverge) {
    PhiloxStream s(9, 0);
    const int n = 200000;
    double m1 = 0.0, m2 = 0.0;
    for (int i = 0; i < n; ++i) {
        const double z = s.next_normal();
        m1 += z;
        m2 += z * z;
    }
    m1 /= n;
    m2 /= n;
    EXPECT_NEAR(m1, 0.0, 5.0 / std::sqrt(n));
    EXPECT_NEAR(m2, 1.0, 5.0 * std::sqrt(2.0 / n));
}

TEST(Philox, UniformBelowStaysInRangeAndCoversIt) {
    PhiloxStream s(5, 5);
    std::set<std::uint32_t> seen;
    for (int i = 0; i < 10000; ++i) {
        const auto x = s.uniform_below(7);
        ASSERT_LT(x, 7u);
        seen.insert(x);
    }
    EXPECT_EQ(seen.size(), 7u);
    for (int i = 0; i < 100; ++i) EXPECT_EQ(s.uniform_below(1), 0u);
}
