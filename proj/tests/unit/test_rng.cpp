#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "isda/rng.hpp"

using isda::RngStream;

TEST(RngStream, SameSeedAndStreamRepeat) {
  RngStream a(42, 7), b(42, 7);
  for (int i = 0; i < 1000; ++i) ASSERT_EQ(a(), b());
}

TEST(RngStream, StreamIdChangesSequence) {
  RngStream a(42, 0), b(42, 1);
  int equal = 0;
  for (int i = 0; i < 100; ++i) equal += a() == b();
  EXPECT_EQ(equal, 0);
}

TEST(RngStream, DistinctStreamsUncorrelated) {
  const int n = 100000;
  RngStream a = RngStream(3).substream(0);
  RngStream b = RngStream(3).substream(1);
  double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
  for (int i = 0; i < n; ++i) {
    const double x = a.normal();
    const double y = b.normal();
    sa += x; sb += y; saa += x * x; sbb += y * y; sab += x * y;
  }
  const double cov = sab / n - sa / n * sb / n;
  const double r = cov / std::sqrt((saa / n - sa * sa / n / n) *
                                   (sbb / n - sb * sb / n / n));
  EXPECT_LT(std::abs(r), 0.01);
}

TEST(RngStream, SubstreamIsPureFunctionOfIndex) {
  const RngStream root(11, 5);
  RngStream x = root.substream(17);
  RngStream y = root.substream(17);
  EXPECT_EQ(x.stream_id(), y.stream_id());
  for (int i = 0; i < 10; ++i) EXPECT_EQ(x(), y());
  EXPECT_NE(root.substream(17).stream_id(), root.substream(18).stream_id());
}

TEST(RngStream, UniformInOpenInterval) {
  RngStream r(1);
  double mean = 0.0;
  for (int i = 0; i < 100000; ++i) {
    const double u = r.uniform();
    ASSERT_GT(u, 0.0);
    ASSERT_LT(u, 1.0);
    mean += u;
  }
  EXPECT_NEAR(mean / 100000, 0.5, 4.0 * std::sqrt(1.0 / 12.0 / 100000));
}

TEST(RngStream, NormalMoments) {
  RngStream r(9);
  const int n = 200000;
  double s1 = 0, s2 = 0, s4 = 0;
  for (int i = 0; i < n; ++i) {
    const double z = r.normal();
    s1 += z; s2 += z * z; s4 += z * z * z * z;
  }
  EXPECT_NEAR(s1 / n, 0.0, 4.0 / std::sqrt(n));
  EXPECT_NEAR(s2 / n, 1.0, 4.0 * std::sqrt(2.0 / n));
  EXPECT_NEAR(s4 / n, 3.0, 4.0 * std::sqrt(96.0 / n));
}
