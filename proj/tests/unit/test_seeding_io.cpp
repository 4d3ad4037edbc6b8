#include <catch_amalgamated.hpp>

#include <cstring>
#include <set>
#include <sstream>

#include "qrlab/discrete_law.hpp"
#include "qrlab/errors.hpp"
#include "qrlab/matrix_io.hpp"
#include "qrlab/seeding.hpp"

using namespace qrlab;
using Catch::Approx;

TEST_CASE("derived seeds are deterministic and separate streams") {
  CHECK(derive_seed(7, Stream::data, 3) == derive_seed(7, Stream::data, 3));
  std::set<std::uint64_t> seen;
  for (std::uint64_t master : {0ull, 1ull, 2ull})
    for (auto s : {Stream::data, Stream::teacher, Stream::noise, Stream::test_points})
      for (std::uint64_t idx = 0; idx < 4; ++idx) seen.insert(derive_seed(master, s, idx));
  CHECK(seen.size() == 3 * 4 * 4);

  Engine a = make_engine(11, Stream::noise), b = make_engine(11, Stream::noise);
  for (int i = 0; i < 5; ++i) CHECK(a() == b());
}

TEST_CASE("DiscreteLaw validates weights and compresses duplicates") {
  CHECK_THROWS_AS(DiscreteLaw({1.0, 2.0}, {0.5, 0.4}), InvalidArgument);
  CHECK_THROWS_AS(DiscreteLaw({1.0}, {1.0, 0.0}), InvalidArgument);
  CHECK_THROWS_AS(DiscreteLaw({}, {}), InvalidArgument);

  const DiscreteLaw u = DiscreteLaw::uniform({2.0, 3.0, 2.0, 2.0});
  const DiscreteLaw c = u.compressed();
  REQUIRE(c.size() == 2);
  CHECK(c.atoms()[0] == 2.0);
  CHECK(c.weights()[0] == Approx(0.75));
  CHECK(c.mean() == Approx(u.mean()));
  CHECK(u.mean() == Approx(2.25));
  CHECK(u.scaled(2.0).max_atom() == 6.0);
  CHECK(DiscreteLaw::point(5.0).expect([](double x) { return x * x; }) == 25.0);
}

TEST_CASE("QRLB round trip and byte layout") {
  Eigen::MatrixXd m(2, 3);
  m << 1.5, -2.0, 3.25, 0.0, 1e-300, -7.0;
  std::stringstream ss;
  io::write_qrlb(ss, m);
  const std::string bytes = ss.str();
  REQUIRE(bytes.size() == 4 + 4 + 4 + 6 * 8);
  CHECK(bytes.substr(0, 4) == "QRLB");
  std::uint32_t rows = 0;
  std::memcpy(&rows, bytes.data() + 4, 4);
  CHECK(rows == 2);  // little-endian host
  double first = 0.0;
  std::memcpy(&first, bytes.data() + 12, 8);
  CHECK(first == 1.5);
  double second = 0.0;
  std::memcpy(&second, bytes.data() + 20, 8);
  CHECK(second == -2.0);  // row-major

  const Eigen::MatrixXd back = io::read_qrlb(ss);
  CHECK(back == m);

  std::stringstream bad("QRLX");
  CHECK_THROWS_AS(io::read_qrlb(bad), InvalidArgument);
  std::stringstream trunc(bytes.substr(0, 20));
  CHECK_THROWS_AS(io::read_qrlb(trunc), InvalidArgument);
}

TEST_CASE("CSV round trip with x1..xd header") {
  Eigen::MatrixXd m(3, 2);
  m << 0.1, 0.2, -1.0 / 3.0, 4.0, 1e10, -5e-7;
  std::stringstream ss;
  io::write_csv(ss, m);
  std::string header;
  std::getline(std::stringstream(ss.str()), header);
  CHECK(header == "x1,x2");
  const Eigen::MatrixXd back = io::read_csv(ss);
  REQUIRE(back.rows() == 3);
  CHECK(back == m);

  std::stringstream col;
  const std::vector<double> v{1.0, 2.5};
  io::write_column_csv(col, v);
  CHECK(col.str() == "eigenvalue\n1\n2.5\n");
}
