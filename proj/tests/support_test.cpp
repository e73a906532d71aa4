#include <gtest/gtest.h>

#include <cmath>
#include <json.hpp>
#include <set>
#include <sstream>

#include "cli/config.hpp"
#include "cli/manifest.hpp"
#include "cli/svg.hpp"
#include "falmkit/csv.hpp"
#include "falmkit/error.hpp"
#include "falmkit/image.hpp"
#include "falmkit/parallel.hpp"
#include "falmkit/rng.hpp"
#include "test_support.hpp"

using namespace falmkit;
using falmkit::testing::TempDir;

TEST(Csv, QuotesCrlfAndEmbeddedNewlines) {
  std::istringstream in("a,b,c\r\n1,\"x, y\",\"say \"\"hi\"\"\"\r\n2,\"two\nlines\",z\n3,,\n");
  const CsvTable t = parse_csv(in, "t.csv");
  ASSERT_EQ(t.rows().size(), 3u);
  EXPECT_EQ(t.rows()[0].fields[1], "x, y");
  EXPECT_EQ(t.rows()[0].fields[2], "say \"hi\"");
  EXPECT_EQ(t.rows()[1].fields[1], "two\nlines");
  EXPECT_EQ(t.rows()[2].line, 5u);
  EXPECT_EQ(t.rows()[2].fields[2], "");
  EXPECT_EQ(t.column("c"), 2u);
  EXPECT_FALSE(t.find_column("d").has_value());
  EXPECT_THROW((void)t.column("d"), SchemaError);
}

TEST(Csv, RaggedRowNamesItsLine) {
  std::istringstream in("a,b\n1,2\n3\n");
  try {
    parse_csv(in, "r.csv");
    FAIL();
  } catch (const SchemaError& e) {
    EXPECT_EQ(e.line(), 3u);
    EXPECT_EQ(e.file(), "r.csv");
  }
}

TEST(Csv, WriterRoundTrips) {
  std::ostringstream out;
  write_csv_row(out, {"plain", "with,comma", "with \"quote\"", ""});
  std::istringstream in("h1,h2,h3,h4\n" + out.str());
  const CsvTable t = parse_csv(in, "w");
  EXPECT_EQ(t.rows()[0].fields, (std::vector<std::string>{"plain", "with,comma", "with \"quote\"", ""}));
  EXPECT_EQ(csv_escape("a\"b"), "\"a\"\"b\"");
}

TEST(Csv, NumberParsingIsStrict) {
  EXPECT_EQ(parse_real(" 1.5 "), 1.5);
  EXPECT_EQ(parse_real("-2e3"), -2000.0);
  EXPECT_FALSE(parse_real("1.5x"));
  EXPECT_FALSE(parse_real(""));
  EXPECT_FALSE(parse_real("nan"));
  EXPECT_EQ(parse_integer("42"), 42);
  EXPECT_FALSE(parse_integer("4.2"));
  EXPECT_EQ(format_fixed(1.23456, 3), "1.235");
  EXPECT_EQ(format_fixed(NAN, 3), "NA");
  EXPECT_EQ(format_fixed(-0.0000001, 3), "0.000");
  EXPECT_EQ(trim("  a b \t"), "a b");
}

TEST(Rng, DerivedStreamsAreStableAndDistinct) {
  Rng a = Rng::derive(7, {1, 2});
  Rng b = Rng::derive(7, {1, 2});
  Rng c = Rng::derive(7, {2, 1});
  Rng d = Rng::derive(8, {1, 2});
  const auto x = a.next_u64();
  EXPECT_EQ(x, b.next_u64());
  EXPECT_NE(x, c.next_u64());
  EXPECT_NE(x, d.next_u64());
  EXPECT_NE(mix64(1), mix64(2));
}

TEST(Rng, DistributionsBehave) {
  Rng r(123);
  double sum = 0, sum2 = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double z = r.normal();
    sum += z;
    sum2 += z * z;
  }
  EXPECT_NEAR(sum / n, 0.0, 0.01);
  EXPECT_NEAR(sum2 / n, 1.0, 0.02);
  std::vector<int> hist(7, 0);
  for (int i = 0; i < 70000; ++i) {
    const double u = r.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    ++hist[r.uniform_index(7)];
  }
  for (int h : hist) EXPECT_NEAR(h, 10000, 500);
  EXPECT_THROW(r.uniform_index(0), Error);
}

TEST(Parallel, SlotsAndLowestError) {
  std::vector<std::size_t> out(1000);
  parallel_for(out.size(), 8, [&](std::size_t i) { out[i] = i * i; });
  for (std::size_t i = 0; i < out.size(); ++i) ASSERT_EQ(out[i], i * i);
  try {
    parallel_for(100, 4, [](std::size_t i) {
      if (i == 17 || i == 60) throw std::runtime_error(std::to_string(i));
    });
    FAIL();
  } catch (const std::runtime_error& e) {
    EXPECT_STREQ(e.what(), "17");
  }
}

TEST(ImageIo, BmpAndPngRoundTrip) {
  TempDir dir("img");
  Image img(7, 5);
  for (int y = 0; y < 5; ++y) {
    for (int x = 0; x < 7; ++x) {
      img.at(x, y) = {static_cast<std::uint8_t>(x * 30), static_cast<std::uint8_t>(y * 50),
                      static_cast<std::uint8_t>((x + y) * 10)};
    }
  }
  write_bmp(dir / "a.bmp", img);
  write_png(dir / "a.png", img);
  const Image b = read_image(dir / "a.bmp");
  const Image p = read_image(dir / "a.png");
  EXPECT_EQ(b.width(), 7);
  EXPECT_EQ(b.height(), 5);
  EXPECT_EQ(b.pixels(), img.pixels());
  EXPECT_EQ(p.pixels(), img.pixels());
  write_bmp(dir / "c.bmp", img);
  EXPECT_EQ(falmkit::testing::slurp(dir / "a.bmp"), falmkit::testing::slurp(dir / "c.bmp"));
}

TEST(ImageIo, UnreadableFilesAreSchemaErrors) {
  TempDir dir("badimg");
  falmkit::testing::spit(dir / "x.bmp", "not an image");
  try {
    read_image(dir / "x.bmp");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kSchema);
  }
  EXPECT_THROW(read_image(dir / "missing.png"), Error);
}

TEST(Image, FillRectAndBounds) {
  Image img(4, 4, {1, 2, 3});
  img.fill_rect(1, 1, 2, 2, {9, 9, 9});
  EXPECT_EQ(img.at(0, 0), (Rgb8{1, 2, 3}));
  EXPECT_EQ(img.at(2, 2), (Rgb8{9, 9, 9}));
  EXPECT_THROW((void)img.at(4, 0), std::exception);
}

TEST(Settings, PrecedenceAndTypes) {
  TempDir dir("cfg");
  falmkit::testing::spit(dir / "c.conf", "# comment\nsigma = 0.05\nname = \"hello world\"  # trailing\nlevels = 0.1, 0.3\n");
  cli::Settings s({"sigma", "name", "levels", "n", "seed"});
  s.load_file(dir / "c.conf");
  EXPECT_DOUBLE_EQ(s.real("sigma", 1.0), 0.05);
  EXPECT_EQ(s.text("name", ""), "hello world");
  EXPECT_EQ(s.reals("levels", {}), (std::vector<double>{0.1, 0.3}));
  s.set_pair("sigma=0.2");
  EXPECT_DOUBLE_EQ(s.real("sigma", 1.0), 0.2);
  EXPECT_EQ(s.count("n", 9), 9u);
  EXPECT_FALSE(s.u64("seed").has_value());
  s.set("seed", "18446744073709551615");
  EXPECT_EQ(*s.u64("seed"), 18446744073709551615ull);
  try {
    s.set("bogus", "1");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kConfig);
  }
  s.set("n", "-3");
  EXPECT_THROW((void)s.count("n", 1), Error);
  EXPECT_THROW(s.set_pair("novalue"), Error);
}

TEST(Manifest, DigestAndDeterministicOutput) {
  EXPECT_EQ(cli::sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  TempDir dir("manifest");
  falmkit::testing::spit(dir / "in.csv", "abc");
  cli::RunManifest m;
  m.command = "analyze";
  m.seed = 7;
  m.config = {{"b", "2"}, {"a", "1"}};
  m.inputs = {{"subjects", dir / "in.csv"}};
  m.deterministic = true;
  EXPECT_EQ(m.config_digest(), cli::sha256_hex("a=1\nb=2\n"));
  m.write(dir.path());
  const std::string first = falmkit::testing::slurp(dir / "manifest.json");
  m.write(dir.path());
  EXPECT_EQ(first, falmkit::testing::slurp(dir / "manifest.json"));
  const auto j = nlohmann::json::parse(first);
  EXPECT_EQ(j["seed"], 7);
  EXPECT_TRUE(j["timestamp"].is_null());
  EXPECT_EQ(j["inputs"][0]["sha256"], cli::sha256_hex("abc"));
  EXPECT_EQ(j["tool_version"], "1.0.0");
  EXPECT_FALSE(j.contains("jobs"));
}

TEST(Svg, ChartsAreWellFormedAndStamped) {
  const std::string bars = cli::bar_chart({"T", "x", "y", "seed=1"}, {"A", "B"},
                                          {{"s", {1.0, NAN}, {0.5, NAN}, {1.5, NAN}}});
  EXPECT_EQ(bars.rfind("<svg", 0) == 0 || bars.rfind("<?xml", 0) == 0, true);
  EXPECT_NE(bars.find("</svg>"), std::string::npos);
  EXPECT_NE(bars.find("<!-- seed=1 -->"), std::string::npos);
  const std::string hist = cli::histogram({"H", "L", "n", ""}, {{"B", {1, 2, 3}}, {"W", {2, 3, 4}}}, 0, 5, 5, 2.5);
  EXPECT_NE(hist.find("</svg>"), std::string::npos);
  EXPECT_EQ(hist.find("<!--"), std::string::npos);
  EXPECT_EQ(cli::bar_chart({"T", "x", "y", ""}, {"A"}, {{"s", {2.0}, {}, {}}}),
            cli::bar_chart({"T", "x", "y", ""}, {"A"}, {{"s", {2.0}, {}, {}}}));
}
