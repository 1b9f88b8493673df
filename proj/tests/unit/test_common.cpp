#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <random>

#include "parkcast/common/csv.hpp"
#include "parkcast/common/error.hpp"
#include "parkcast/common/fingerprint.hpp"
#include "parkcast/common/time.hpp"

using namespace parkcast;

TEST_CASE("csv parse handles quotes, BOM and CRLF") {
  const auto t = csv::parse("\xEF\xBB\xBF" "a,b\r\n\"x, y\",\"say \"\"hi\"\"\"\r\n1,\n");
  REQUIRE(t.header == std::vector<std::string>{"a", "b"});
  REQUIRE(t.rows.size() == 2);
  CHECK(t.rows[0][0] == "x, y");
  CHECK(t.rows[0][1] == "say \"hi\"");
  CHECK(t.rows[1][1].empty());
  CHECK(t.require("b") == 1);
  CHECK_FALSE(t.column("c").has_value());
  CHECK_THROWS_AS(t.require("c"), SchemaError);
}

TEST_CASE("csv rejects ragged rows and open quotes with a byte offset") {
  CHECK_THROWS_AS(csv::parse("a,b\n1,2,3\n"), ParseError);
  try {
    csv::parse("a,b\n1,\"2\n");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.byte_offset() == 4);
  }
}

TEST_CASE("csv render round-trips") {
  csv::Table t;
  t.header = {"k", "v"};
  t.rows = {{"plain", "with,comma"}, {"quote\"d", "line\nbreak"}};
  const auto back = csv::parse(csv::render(t));
  CHECK(back.header == t.header);
  CHECK(back.rows == t.rows);
}

TEST_CASE("format_double is the shortest round-trip text") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-1e6, 1e6);
  for (int i = 0; i < 2000; ++i) {
    const double v = u(rng) * std::pow(10.0, static_cast<int>(rng() % 20) - 10);
    CHECK(csv::parse_double(csv::format_double(v)) == v);
  }
  CHECK(csv::format_double(0.1) == "0.1");
  CHECK(csv::format_double(945) == "945");
  CHECK_THROWS_AS(csv::parse_double("1.5x"), ArgumentError);
  CHECK_THROWS_AS(csv::parse_int("3.0"), ArgumentError);
  CHECK(csv::parse_int("-42") == -42);
}

TEST_CASE("iso8601 parsing and formatting") {
  const auto t = parse_iso8601("2022-09-05T07:30:15Z");
  CHECK(format_iso8601(t) == "2022-09-05T07:30:15Z");
  CHECK(parse_iso8601("2022-09-05 09:30:15+02:00") == t);
  CHECK(parse_iso8601("2022-09-05T07:30:15.250") == t);
  CHECK(hour_of_day(t) == 7);
  CHECK(format_iso8601(floor_hour(t)) == "2022-09-05T07:00:00Z");
  CHECK(format_iso8601(floor_day(t)) == "2022-09-05T00:00:00Z");
  CHECK(is_hour_aligned(floor_hour(t)));
  CHECK_FALSE(is_hour_aligned(t));
  CHECK(day_index(t, parse_iso8601("2022-09-07T00:00:00Z")) == 2);
  CHECK(day_index(t, parse_iso8601("2022-09-04T23:59:59Z")) == -1);
  CHECK_THROWS_AS(parse_iso8601("2022-13-05T07:30:15Z"), ArgumentError);
  CHECK_THROWS_AS(parse_iso8601("yesterday"), ArgumentError);
}

namespace {

// FNV-1a over the bytes followed by the little-endian 64-bit length.
std::string fnv_reference(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&](unsigned char c) { h = (h ^ c) * 0x100000001b3ULL; };
  for (unsigned char c : s) mix(c);
  for (int i = 0; i < 8; ++i) mix(static_cast<unsigned char>((s.size() >> (8 * i)) & 0xff));
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace

TEST_CASE("fingerprints are stable and sensitive") {
  for (const std::string s : {"", "a", "abc", "dataset.csv\n1,2,3\n"}) CHECK(fingerprint_of(s) == fnv_reference(s));
  CHECK(Fingerprint{}.add(std::string_view("ab")).add(std::string_view("c")).hex() !=
        Fingerprint{}.add(std::string_view("a")).add(std::string_view("bc")).hex());
  CHECK(fingerprint_of("abc") != fingerprint_of("abd"));
  Fingerprint a, b;
  a.add(1.0).add(std::int64_t{2});
  b.add(1.0).add(std::int64_t{2});
  CHECK(a.hex() == b.hex());
  b.add(std::uint64_t{0});
  CHECK(a.hex() != b.hex());
}

TEST_CASE("write_file then read_file returns the bytes") {
  const auto dir = std::filesystem::temp_directory_path() / "parkcast_common_test";
  std::filesystem::create_directories(dir);
  const auto p = dir / "f.txt";
  write_file(p, "line1\nline2\n");
  CHECK(read_file(p) == "line1\nline2\n");
  CHECK_THROWS_AS(read_file(dir / "missing.txt"), InputError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("error hierarchy carries structured details") {
  const FingerprintMismatch f("model", "aaa", "bbb");
  CHECK(f.expected() == "aaa");
  CHECK(f.actual() == "bbb");
  CHECK(std::string(f.what()).find("aaa") != std::string::npos);
  const ConvergenceError c("smo", 0.5);
  CHECK(c.max_violation() == 0.5);
  const DivergenceError d("lstm", 3);
  CHECK(d.epoch() == 3);
  const ValidationError v({{"gates", "unique", "duplicate id 2"}});
  CHECK(v.violations().size() == 1);
  CHECK(dynamic_cast<const InputError*>(&v) != nullptr);
}
