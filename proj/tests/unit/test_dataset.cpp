#include <doctest.h>

#include <cmath>
#include <limits>
#include <sstream>

#include "rfimp/csv.hpp"
#include "rfimp/dataset.hpp"
#include "rfimp/error.hpp"
#include "rfimp/random.hpp"

using namespace rfimp;

namespace {

std::vector<ColumnSpec> xy_specs() {
  return {ColumnSpec::continuous("x"), ColumnSpec::continuous("y")};
}

Dataset parse(const std::string& text, const std::vector<ColumnSpec>& specs) {
  std::istringstream in(text);
  return read_csv(in, specs);
}

std::string emit(const Dataset& ds) {
  std::ostringstream out;
  write_csv(ds, out);
  return out.str();
}

}  // namespace

TEST_CASE("read_csv flags NA and empty cells as missing") {
  const Dataset ds = parse("x,y\n1.5,NA\n2.0,3.0\n", xy_specs());
  REQUIRE(ds.n_rows() == 2);
  CHECK_FALSE(ds.column("x").is_missing(0));
  CHECK_FALSE(ds.column("x").is_missing(1));
  CHECK(ds.column("y").is_missing(0));
  CHECK_FALSE(ds.column("y").is_missing(1));
  CHECK(ds.column("x").at(0) == 1.5);
  CHECK(ds.column("y").at(1) == 3.0);
  CHECK_FALSE(ds.column("y").get(0).has_value());

  const Dataset empty_cell = parse("x,y\n,4\n", xy_specs());
  CHECK(empty_cell.column("x").is_missing(0));
}

TEST_CASE("read_csv with header only gives zero rows") {
  const Dataset ds = parse("x,y\n", xy_specs());
  CHECK(ds.n_rows() == 0);
  CHECK(ds.n_cols() == 2);
}

TEST_CASE("read_csv reports row and column of a bad number") {
  try {
    parse("x,y\nabc,1\n", xy_specs());
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.row() == 1);
    CHECK(e.column() == "x");
  }
}

TEST_CASE("read_csv errors") {
  SUBCASE("unknown level") {
    std::vector<ColumnSpec> specs{ColumnSpec::categorical("g", {"a", "b"})};
    CHECK_THROWS_AS(parse("g\na\nc\n", specs), ParseError);
  }
  SUBCASE("header mismatch") { CHECK_THROWS_AS(parse("x,z\n1,2\n", xy_specs()), Error); }
  SUBCASE("ragged row") { CHECK_THROWS_AS(parse("x,y\n1\n", xy_specs()), ParseError); }
  SUBCASE("header order may differ from specs") {
    const Dataset ds = parse("y,x\n1,2\n", xy_specs());
    CHECK(ds.names() == std::vector<std::string>{"y", "x"});
    CHECK(ds.column("x").at(0) == 2.0);
  }
}

TEST_CASE("categorical columns store level indices and quoted labels survive") {
  std::vector<ColumnSpec> specs{ColumnSpec::categorical("g", {"lo", "hi, very"}),
                                ColumnSpec::continuous("v")};
  const Dataset ds = parse("g,v\nlo,1\n\"hi, very\",2\nNA,3\n", specs);
  CHECK(ds.column("g").at(0) == 0.0);
  CHECK(ds.column("g").at(1) == 1.0);
  CHECK(ds.column("g").is_missing(2));
  CHECK(parse(emit(ds), specs) == ds);
}

TEST_CASE("write_csv round trip and missing tokens") {
  const Dataset ds = parse("x,y\n1.5,NA\n2.0,3.0\n", xy_specs());
  CHECK(parse(emit(ds), xy_specs()) == ds);

  Dataset all_missing;
  all_missing.add_column(Column::all_missing(ColumnSpec::continuous("x"), 2));
  CHECK(emit(all_missing) == "x\nNA\nNA\n");

  const Dataset empty = parse("x,y\n", xy_specs());
  CHECK(emit(empty) == "x,y\n");
}

TEST_CASE("property: write/read is the identity on random datasets") {
  Rng rng(11);
  for (int trial = 0; trial < 25; ++trial) {
    const std::size_t n = uniform_index(rng, 30);
    std::vector<double> a(n), b(n);
    std::vector<std::uint8_t> ma(n), mb(n);
    for (std::size_t i = 0; i < n; ++i) {
      a[i] = std::ldexp(standard_normal(rng), static_cast<int>(uniform_index(rng, 80)) - 40);
      b[i] = static_cast<double>(uniform_index(rng, 3));
      ma[i] = uniform01(rng) < 0.2;
      mb[i] = uniform01(rng) < 0.2;
    }
    std::vector<ColumnSpec> specs{ColumnSpec::continuous("a"),
                                  ColumnSpec::categorical("b", {"p", "q", "r"})};
    const Dataset ds(std::vector<Column>{Column(specs[0], a, ma), Column(specs[1], b, mb)});
    const Dataset back = parse(emit(ds), specs);
    REQUIRE(back == ds);
    for (std::size_t c = 0; c < back.n_cols(); ++c)
      for (std::size_t r = 0; r < n; ++r)
        CHECK(back.column(c).get(r).has_value() == !back.column(c).is_missing(r));
  }
}

TEST_CASE("read_csv_inferred") {
  std::istringstream in("a,b,c\n1,x,NA\n2.5,y,3\n");
  const Dataset ds = read_csv_inferred(in);
  CHECK(ds.column("a").kind() == ColumnKind::Continuous);
  CHECK(ds.column("b").kind() == ColumnKind::Categorical);
  CHECK(ds.column("b").spec().levels == std::vector<std::string>{"x", "y"});
  CHECK(ds.column("c").kind() == ColumnKind::Continuous);
}

TEST_CASE("add_product_column") {
  Dataset ds;
  ds.add_column(Column(ColumnSpec::continuous("a"), {2, 3}, {0, 0}));
  ds.add_column(Column(ColumnSpec::continuous("b"), {4, 5}, {0, 0}));
  const Dataset out = add_product_column(ds, "a", "b", "ab");
  CHECK(out.column("ab").at(0) == 8);
  CHECK(out.column("ab").at(1) == 15);

  Dataset gap;
  gap.add_column(Column(ColumnSpec::continuous("a"), {2, 0}, {0, 1}));
  gap.add_column(Column(ColumnSpec::continuous("b"), {4, 5}, {0, 0}));
  const Dataset out2 = add_product_column(gap, "a", "b", "ab");
  CHECK(out2.column("ab").at(0) == 8);
  CHECK(out2.column("ab").is_missing(1));

  CHECK_THROWS_AS(add_product_column(ds, "nope", "b", "ab"), Error);
  Dataset cat;
  cat.add_column(Column(ColumnSpec::categorical("g", {"u", "v"}), {0, 1}));
  cat.add_column(Column(ColumnSpec::continuous("b"), {4, 5}));
  CHECK_THROWS_AS(add_product_column(cat, "g", "b", "gb"), Error);
}

TEST_CASE("dataset invariants are enforced") {
  CHECK_THROWS_AS(ColumnSpec::categorical("g", {}), Error);
  CHECK_THROWS_AS(ColumnSpec::categorical("g", {"a", "a"}), Error);
  CHECK_THROWS_AS(Column(ColumnSpec::categorical("g", {"a"}), {1.0}), Error);
  Dataset ds;
  ds.add_column(Column(ColumnSpec::continuous("a"), {1, 2}));
  CHECK_THROWS_AS(ds.add_column(Column(ColumnSpec::continuous("a"), {1, 2})), Error);
  CHECK_THROWS_AS(ds.add_column(Column(ColumnSpec::continuous("b"), {1})), Error);
  CHECK_THROWS_AS(ds.column("a").at(5), std::out_of_range);
}
