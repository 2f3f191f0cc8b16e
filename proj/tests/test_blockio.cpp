#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <string>

#include "graphvec/blockio.hpp"
#include "graphvec/errors.hpp"
#include "graphvec/graph.hpp"
#include "graphvec/rng.hpp"

using graphvec::Matrix;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
  const fs::path p = fs::temp_directory_path() / "graphvec_test_io";
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

void write_text(const fs::path& p, const std::string& body) {
  std::ofstream out(p);
  out << body;
}

}  // namespace

TEST_CASE("block file round-trips matrices and int blocks exactly") {
  graphvec::Rng rng(5);
  Matrix m(4, 3);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 3; ++j) m(i, j) = rng.normal();

  graphvec::BlockFile f;
  f.format = "graphvec.test";
  f.meta["answer"] = 42;
  f.add_f64("m", m);
  f.add_i32("ids", {3, 1, 4, 1, 5, 9}, 3, 2);

  const fs::path path = temp_dir() / "roundtrip.bin";
  graphvec::write_block_file(path.string(), f);
  const auto g = graphvec::read_block_file(path.string());
  CHECK(g.format == "graphvec.test");
  CHECK(g.meta.at("answer") == 42);
  CHECK((g.require("m").f64 - m).cwiseAbs().maxCoeff() == 0.0);
  CHECK(g.require("ids").i32 == std::vector<std::int32_t>({3, 1, 4, 1, 5, 9}));
  CHECK(g.require("ids").rows == 3);
  CHECK(g.has("m"));
  CHECK(!g.has("absent"));
  CHECK_THROWS_AS(g.require("absent"), graphvec::MalformedInputError);
}

TEST_CASE("identical content writes byte-identical files") {
  Matrix m(2, 2);
  m << 1.0, -0.25, 3.5e-7, 1e300;
  const fs::path p1 = temp_dir() / "bytes_a.bin";
  const fs::path p2 = temp_dir() / "bytes_b.bin";
  for (const auto& p : {p1, p2}) {
    graphvec::BlockFile f;
    f.format = "graphvec.test";
    f.meta["k"] = "v";
    f.add_f64("m", m);
    graphvec::write_block_file(p.string(), f);
  }
  CHECK(slurp(p1) == slurp(p2));
}

TEST_CASE("corrupt containers are rejected") {
  const fs::path path = temp_dir() / "corrupt.bin";
  write_text(path, "NOTMAGIC????????rest");
  CHECK_THROWS_AS(graphvec::read_block_file(path.string()), graphvec::MalformedInputError);
  CHECK_THROWS_AS(graphvec::read_block_file((temp_dir() / "missing.bin").string()),
                  graphvec::IngestError);

  // Truncate a valid file mid-payload.
  graphvec::BlockFile f;
  f.format = "graphvec.test";
  f.add_f64("m", Matrix::Ones(8, 8));
  const fs::path full = temp_dir() / "full.bin";
  graphvec::write_block_file(full.string(), f);
  const std::string bytes = slurp(full);
  std::ofstream out(temp_dir() / "trunc.bin", std::ios::binary);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() - 17));
  out.close();
  CHECK_THROWS_AS(graphvec::read_block_file((temp_dir() / "trunc.bin").string()),
                  graphvec::MalformedInputError);
}

namespace {

// Two graphs: a 2-path (nodes 1,2) and a 3-triangle (nodes 3,4,5), labels 7/9
// remapped to 0/1, with 1-d continuous attributes and binary node labels.
void write_fixture(const fs::path& dir) {
  fs::create_directories(dir);
  write_text(dir / "toy_A.txt", "1, 2\n2, 1\n3, 4\n4, 3\n4, 5\n5, 4\n3, 5\n5, 3\n");
  write_text(dir / "toy_graph_indicator.txt", "1\n1\n2\n2\n2\n");
  write_text(dir / "toy_graph_labels.txt", "9\n7\n");
  write_text(dir / "toy_node_attributes.txt", "0.5\n1.5\n2.5\n3.5\n4.5\n");
  write_text(dir / "toy_node_labels.txt", "0\n1\n1\n0\n1\n");
}

}  // namespace

TEST_CASE("tudataset fixture parses with remapped labels and one-hot append") {
  const fs::path dir = temp_dir() / "toy_ds";
  write_fixture(dir);
  const auto ds = graphvec::parse_tudataset(dir.string(), "toy");
  ds.validate();
  REQUIRE(ds.size() == 2);
  CHECK(ds.name == "toy");
  CHECK(ds.has_attributes);
  CHECK(ds.attribute_dim == 3);  // 1 continuous + 2 one-hot
  CHECK(ds.graphs[0].n() == 2);
  CHECK(ds.graphs[1].n() == 3);
  CHECK(ds.graphs[0].label == 1);  // raw 9 -> sorted rank 1
  CHECK(ds.graphs[1].label == 0);  // raw 7 -> sorted rank 0
  CHECK(ds.graphs[0].num_edges() == 1);
  CHECK(ds.graphs[1].num_edges() == 3);
  CHECK(ds.graphs[0].attributes(0, 0) == 0.5);
  CHECK(ds.graphs[1].attributes(2, 0) == 4.5);
  // One-hot columns ordered by sorted node-label value: node 1 has label 0.
  CHECK(ds.graphs[0].attributes(0, 1) == 1.0);
  CHECK(ds.graphs[0].attributes(0, 2) == 0.0);
  CHECK(ds.graphs[0].attributes(1, 1) == 0.0);
  CHECK(ds.graphs[0].attributes(1, 2) == 1.0);
}

TEST_CASE("tudataset rejects malformed inputs") {
  const fs::path dir = temp_dir() / "bad_ds";
  write_fixture(dir);
  CHECK_THROWS_AS(graphvec::parse_tudataset((temp_dir() / "nope").string(), "toy"),
                  graphvec::IngestError);

  write_text(dir / "toy_graph_indicator.txt", "1\n1\n2\n2\n3\n");  // label count mismatch
  CHECK_THROWS_AS(graphvec::parse_tudataset(dir.string(), "toy"),
                  graphvec::MalformedInputError);
  write_fixture(dir);
  write_text(dir / "toy_A.txt", "1, 9\n");  // endpoint out of range
  CHECK_THROWS_AS(graphvec::parse_tudataset(dir.string(), "toy"),
                  graphvec::MalformedInputError);
  write_fixture(dir);
  write_text(dir / "toy_A.txt", "1, 3\n3, 1\n");  // edge crosses graphs
  CHECK_THROWS_AS(graphvec::parse_tudataset(dir.string(), "toy"),
                  graphvec::MalformedInputError);
}

TEST_CASE("dataset save/load round-trips graphs, labels, attributes") {
  const fs::path dir = temp_dir() / "toy_ds2";
  write_fixture(dir);
  auto ds = graphvec::parse_tudataset(dir.string(), "toy");
  const fs::path out = temp_dir() / "toy.gvds";
  graphvec::save_dataset(out.string(), ds);
  const auto back = graphvec::load_dataset(out.string());
  back.validate();
  REQUIRE(back.size() == ds.size());
  CHECK(back.name == ds.name);
  CHECK(back.has_attributes == ds.has_attributes);
  CHECK(back.attribute_dim == ds.attribute_dim);
  for (int i = 0; i < ds.size(); ++i) {
    CHECK(back.graphs[i].label == ds.graphs[i].label);
    CHECK((back.graphs[i].adjacency - ds.graphs[i].adjacency).cwiseAbs().maxCoeff() == 0.0);
    CHECK((back.graphs[i].attributes - ds.graphs[i].attributes).cwiseAbs().maxCoeff() == 0.0);
  }

  // Unattributed datasets round-trip too.
  const auto cyc_ds = graphvec::generate_synthetic(graphvec::SynthKind::Cycle, 3, {4, 7}, 1);
  const fs::path out2 = temp_dir() / "cyc.gvds";
  graphvec::save_dataset(out2.string(), cyc_ds);
  const auto back2 = graphvec::load_dataset(out2.string());
  CHECK(back2.size() == 3);
  CHECK(!back2.has_attributes);
  for (int i = 0; i < 3; ++i)
    CHECK((back2.graphs[i].adjacency - cyc_ds.graphs[i].adjacency).cwiseAbs().maxCoeff() == 0.0);
}
