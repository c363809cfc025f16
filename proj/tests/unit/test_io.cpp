#include <charconv>
#include <cmath>
#include <filesystem>
#include <limits>

#include "doctest.h"
#include "oilid/csv.hpp"
#include "oilid/errors.hpp"

using namespace oilid;
using namespace oilid::io;

TEST_CASE("number formatting round-trips exactly") {
  for (double v : {0.0, 1.0, -2.5, 596.3, 1e-300, 9.9378e-6, 0.1 + 0.2,
                   std::numeric_limits<double>::max(), std::numeric_limits<double>::denorm_min()}) {
    const std::string s = format_number(v);
    double back = 0;
    std::from_chars(s.data(), s.data() + s.size(), back);
    CHECK(back == v);
  }
  CHECK(format_number(596.3) == "596.3");
  CHECK(format_number(0.5) == "0.5");
}

TEST_CASE("csv write then parse") {
  CsvTable t;
  t.header = {"a", "b_m", "c"};
  t.rows = {{1, 2.5e-6, -3}, {0.1, 0.2, 0.3}};
  const std::string text = to_csv_string(t);
  CHECK(text.rfind("a,b_m,c\n1,", 0) == 0);
  const CsvTable back = parse_csv(text);
  CHECK(back.header == t.header);
  CHECK(back.rows == t.rows);
  CHECK(back.column("c") == 2);
  CHECK_THROWS_AS(back.column("d"), SchemaError);
  // Stable output: a second trip produces identical bytes.
  CHECK(to_csv_string(back) == text);
}

TEST_CASE("csv tolerance and rejection") {
  const CsvTable t = parse_csv("x, y\r\n1, 2\r\n\r\n3,4\n");
  CHECK(t.header == std::vector<std::string>{"x", "y"});
  REQUIRE(t.rows.size() == 2);
  CHECK(t.rows[1][0] == 3.0);

  try {
    parse_csv("x,y\n1,2\n3\n", "short.csv");
    FAIL("short row accepted");
  } catch (const SchemaError& e) {
    CHECK(e.row() == 3);
    CHECK(std::string(e.what()).find("short.csv") != std::string::npos);
  }
  try {
    parse_csv("x,speed\n1,fast\n", "words.csv");
    FAIL("text accepted");
  } catch (const SchemaError& e) {
    CHECK(std::string(e.what()).find("speed") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_csv("", "empty.csv"), SchemaError);
  CHECK_THROWS_AS(parse_csv("x\n1.5e\n"), SchemaError);
}

TEST_CASE("header checks name the column") {
  const CsvTable t = parse_csv("time_s,q1\n0,1\n");
  CHECK_NOTHROW(require_header(t, {"time_s", "q1"}, "f"));
  auto message = [&](const std::vector<std::string>& expected) {
    try {
      require_header(t, expected, "f");
    } catch (const SchemaError& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  CHECK(message({"time_s", "q2"}).find("'q2'") != std::string::npos);
  CHECK(message({"time_s", "q1", "q3"}).find("missing column 'q3'") != std::string::npos);
  CHECK(message({"time_s"}).find("extra column 'q1'") != std::string::npos);
}

TEST_CASE("atomic write creates directories and replaces content") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "oilid_io_test";
  fs::remove_all(dir);
  const std::string path = (dir / "sub" / "out.csv").string();
  write_text_atomic(path, "first\n");
  CHECK(read_text(path) == "first\n");
  write_text_atomic(path, "second\n");
  CHECK(read_text(path) == "second\n");
  CHECK_FALSE(fs::exists(path + ".tmp"));
  CHECK_THROWS_AS(read_text((dir / "nope.csv").string()), ModelError);
  fs::remove_all(dir);
}
