#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstring>
#include <limits>

#include "fedcs/text_io.hpp"

using namespace fedcs;
using Catch::Matchers::ContainsSubstring;

namespace {

bool same_bits(double a, double b) {
  return std::memcmp(&a, &b, sizeof(double)) == 0;
}

}  // namespace

TEST_CASE("doubles round-trip bit-exactly through text") {
  Rng rng(8);
  std::vector<double> values{0.0,
                             -0.0,
                             0.1,
                             1.0 / 3.0,
                             0.30000000000000004,
                             1e308,
                             -1e308,
                             5e-324,
                             std::numeric_limits<double>::min(),
                             std::numeric_limits<double>::epsilon()};
  for (int i = 0; i < 1000; ++i) values.push_back(std::exp(8.0 * rng.gaussian()));
  for (double v : values) {
    const std::string text = format_double(v);
    TokenReader r(text, "test");
    REQUIRE(same_bits(r.read_double(), v));
  }
}

TEST_CASE("format_double uses the shortest form") {
  REQUIRE(format_double(0.5) == "0.5");
  REQUIRE(format_double(1.0) == "1");
  REQUIRE(format_double(-2.0) == "-2");
}

TEST_CASE("token reader reports position and bad tokens") {
  TokenReader r("1 2 oops", "somefile");
  REQUIRE(r.read_int() == 1);
  REQUIRE(r.read_int() == 2);
  REQUIRE_THROWS_WITH(r.read_double(),
                      ContainsSubstring("somefile") &&
                          ContainsSubstring("oops") &&
                          ContainsSubstring("token 3"));

  TokenReader empty("  \n\t ", "e");
  REQUIRE_THROWS_WITH(empty.read_int(), ContainsSubstring("unexpected end"));

  TokenReader trail("7 extra", "t");
  REQUIRE(trail.read_int() == 7);
  REQUIRE_THROWS_WITH(trail.expect_end(), ContainsSubstring("trailing"));

  TokenReader words("x y", "w");
  words.expect_word("x");
  REQUIRE_THROWS_WITH(words.expect_word("z"), ContainsSubstring("expected 'z'"));
}

TEST_CASE("matrix text round-trips bit-exactly") {
  Rng rng(91);
  Matrix m(5, 3);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.gaussian();
  const std::string text = matrix_to_text(m);
  const Matrix back = parse_matrix_text(text, "roundtrip");
  REQUIRE(back.rows() == 5);
  REQUIRE(back.cols() == 3);
  for (Eigen::Index i = 0; i < m.size(); ++i)
    REQUIRE(same_bits(m.data()[i], back.data()[i]));
}

TEST_CASE("matrix parsing rejects malformed input") {
  REQUIRE_THROWS_WITH(parse_matrix_text("2 2\n1 2\n3", "short"),
                      ContainsSubstring("unexpected end"));
  REQUIRE_THROWS_WITH(parse_matrix_text("2 2\n1 2\n3 4\n5", "long"),
                      ContainsSubstring("trailing"));
  REQUIRE_THROWS_WITH(parse_matrix_text("0 2\n", "dims"),
                      ContainsSubstring("positive"));
  REQUIRE_THROWS_WITH(parse_matrix_text("a 2\n", "header"),
                      ContainsSubstring("bad integer"));
  REQUIRE_THROWS_WITH(parse_matrix_text("2 2\n1 2\n3 nan4\n", "value"),
                      ContainsSubstring("bad number"));
}

TEST_CASE("dataset text round-trips bit-exactly") {
  Dataset ds;
  ds.m = 2;
  ds.n = 4;
  Rng rng(12);
  for (int s = 0; s < 3; ++s) {
    Sample sample;
    sample.x.resize(4);
    sample.y.resize(2);
    for (int i = 0; i < 4; ++i) sample.x[i] = rng.gaussian();
    for (int i = 0; i < 2; ++i) sample.y[i] = rng.gaussian();
    ds.samples.push_back(std::move(sample));
  }
  const Dataset back = parse_dataset_text(dataset_to_text(ds), "roundtrip");
  REQUIRE(back.size() == 3);
  REQUIRE(back.m == 2);
  REQUIRE(back.n == 4);
  for (int s = 0; s < 3; ++s) {
    for (int i = 0; i < 4; ++i)
      REQUIRE(same_bits(ds.samples[s].x[i], back.samples[s].x[i]));
    for (int i = 0; i < 2; ++i)
      REQUIRE(same_bits(ds.samples[s].y[i], back.samples[s].y[i]));
  }
}

TEST_CASE("dataset parsing rejects malformed input") {
  REQUIRE_THROWS_WITH(parse_dataset_text("1 2 2\ny\n1 2\nx\n1 2\n", "swapped"),
                      ContainsSubstring("expected 'x'"));
  REQUIRE_THROWS_WITH(parse_dataset_text("1 0 2\n", "dims"),
                      ContainsSubstring("bad dataset header"));
  REQUIRE_THROWS_WITH(parse_dataset_text("1 2 2\nx\n1 2\ny\n1 2\nleft", "extra"),
                      ContainsSubstring("trailing"));
}

TEST_CASE("file io round-trips and reports missing files") {
  const std::string path = "/tmp/fedcs_text_io_test.txt";
  write_file(path, "payload 123\n");
  REQUIRE(read_file(path) == "payload 123\n");
  REQUIRE_THROWS_WITH(read_file("/tmp/fedcs_does_not_exist_417"),
                      ContainsSubstring("cannot open"));
}

TEST_CASE("saved matrices load back unchanged") {
  Rng rng(5);
  Matrix m(3, 7);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.gaussian();
  const std::string path = "/tmp/fedcs_matrix_io_test.txt";
  save_matrix_file(path, m);
  const Matrix back = load_matrix_file(path);
  for (Eigen::Index i = 0; i < m.size(); ++i)
    REQUIRE(same_bits(m.data()[i], back.data()[i]));
}
