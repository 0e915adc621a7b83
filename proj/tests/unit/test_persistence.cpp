#include <doctest.h>

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "tcssl/corpus.hpp"
#include "tcssl/persistence.hpp"
#include "tcssl/rng.hpp"

using namespace tcssl;
namespace fs = std::filesystem;

namespace {

fs::path work_dir() {
  static fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / "tcssl_test_persistence";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

ModelConfig small_model() {
  ModelConfig cfg;
  cfg.encoder.conv_channels = {4, 8};
  cfg.encoder.embedding_dim = 16;
  cfg.head.num_layers = 2;
  cfg.head.dim = 8;
  return cfg;
}

Checkpoint sample_checkpoint(std::uint64_t seed = 1) {
  Model<float> model(small_model(), /*with_head=*/true, /*with_classifier=*/false);
  model.init_params(seed);
  return snapshot_model(model, "pretrain", nlohmann::json{{"lr", 0.1}, {"note", "x"}},
                        Rng(seed).state(), 42);
}

std::vector<char> read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  return std::vector<char>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>{});
}

void write_bytes(const fs::path& path, const std::vector<char>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

// Rewrites the trailing CRC so tampered content still carries a valid checksum.
void fix_crc(std::vector<char>& bytes) {
  const std::uint32_t crc = crc32_ieee(bytes.data(), bytes.size() - 4);
  std::memcpy(bytes.data() + bytes.size() - 4, &crc, 4);
}

bool same_tensors(const Checkpoint& a, const Checkpoint& b) {
  if (a.tensors.size() != b.tensors.size()) return false;
  for (std::size_t i = 0; i < a.tensors.size(); ++i) {
    if (a.tensors[i].name != b.tensors[i].name) return false;
    if (a.tensors[i].shape != b.tensors[i].shape) return false;
    if (std::memcmp(a.tensors[i].data.data(), b.tensors[i].data.data(),
                    a.tensors[i].data.size() * sizeof(float)) != 0) {
      return false;
    }
  }
  return true;
}

const CorpusReader& fixture_corpus() {
  static CorpusReader* reader = nullptr;
  if (reader == nullptr) {
    fs::path dir = work_dir() / "corpus";
    fs::create_directories(dir);
    GeneratorSpec spec;
    spec.num_videos = 3;
    spec.frames_per_video = 40;
    spec.seed = 17;
    generate_corpus(spec, dir.string(), "persist-fixture");
    reader = new CorpusReader(dir.string());
  }
  return *reader;
}

}  // namespace

TEST_SUITE("persistence") {

TEST_CASE("crc32 matches the published check value") {
  // IEEE CRC-32 of "123456789".
  CHECK(crc32_ieee("123456789", 9) == 0xCBF43926u);
  CHECK(crc32_ieee("", 0) == 0u);
}

TEST_CASE("checkpoint round trip is bit-exact") {
  const Checkpoint ck = sample_checkpoint();
  const fs::path path = work_dir() / "roundtrip.tcs";
  save_checkpoint(path.string(), ck);
  const Checkpoint back = load_checkpoint(path.string());

  CHECK(back.phase == ck.phase);
  CHECK(back.step == ck.step);
  CHECK(back.rng_state == ck.rng_state);
  CHECK(back.config == ck.config);
  REQUIRE(back.tensors.size() == ck.tensors.size());
  CHECK(same_tensors(back, ck));

  SUBCASE("saving the loaded copy reproduces the file byte for byte") {
    const fs::path again = work_dir() / "roundtrip2.tcs";
    save_checkpoint(again.string(), back);
    CHECK(read_bytes(path) == read_bytes(again));
  }
}

TEST_CASE("truncated checkpoint fails the checksum, returning nothing") {
  const fs::path path = work_dir() / "truncate.tcs";
  save_checkpoint(path.string(), sample_checkpoint());
  std::vector<char> bytes = read_bytes(path);

  for (std::size_t keep : {bytes.size() - 5, bytes.size() / 2}) {
    const fs::path cut = work_dir() / "truncated.tcs";
    write_bytes(cut, std::vector<char>(bytes.begin(), bytes.begin() + static_cast<long>(keep)));
    CHECK_THROWS_AS(load_checkpoint(cut.string()), DataError);
  }

  SUBCASE("an empty file is not a checkpoint") {
    const fs::path empty = work_dir() / "empty.tcs";
    write_bytes(empty, {});
    CHECK_THROWS_AS(load_checkpoint(empty.string()), DataError);
  }
  SUBCASE("a missing file is a data error") {
    CHECK_THROWS_AS(load_checkpoint((work_dir() / "nope.tcs").string()), DataError);
  }
}

TEST_CASE("any corrupted byte breaks the checksum") {
  const fs::path path = work_dir() / "corrupt.tcs";
  save_checkpoint(path.string(), sample_checkpoint());
  const std::vector<char> original = read_bytes(path);

  for (std::size_t pos : {std::size_t{20}, original.size() / 2, original.size() - 10}) {
    std::vector<char> bytes = original;
    bytes[pos] = static_cast<char>(bytes[pos] ^ 0x40);
    const fs::path bad = work_dir() / "corrupted.tcs";
    write_bytes(bad, bytes);
    CHECK_THROWS_AS(load_checkpoint(bad.string()), DataError);
  }
}

TEST_CASE("format version mismatch is rejected even with a valid checksum") {
  const fs::path path = work_dir() / "version.tcs";
  save_checkpoint(path.string(), sample_checkpoint());
  std::vector<char> bytes = read_bytes(path);

  const std::uint32_t other = kContainerVersion + 1;
  std::memcpy(bytes.data() + 8, &other, 4);
  fix_crc(bytes);
  const fs::path bad = work_dir() / "versioned.tcs";
  write_bytes(bad, bytes);
  try {
    load_checkpoint(bad.string());
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("version") != std::string::npos);
  }

  SUBCASE("wrong magic is rejected the same way") {
    std::vector<char> magic = read_bytes(path);
    magic[0] = 'X';
    fix_crc(magic);
    write_bytes(bad, magic);
    CHECK_THROWS_AS(load_checkpoint(bad.string()), DataError);
  }
}

TEST_CASE("restoring a pretrain checkpoint into a finetune model drops the head") {
  const Checkpoint ck = sample_checkpoint(5);
  Model<float> fin(small_model(), /*with_head=*/false, /*with_classifier=*/true);
  fin.init_params(99);

  const std::vector<std::string> dropped = restore_params(fin.encoder_params(), ck);
  REQUIRE(dropped.size() == 4);  // two head layers, weight + bias each
  for (const std::string& name : dropped) {
    CHECK(name.rfind("head.", 0) == 0);
  }

  Model<float> pre(small_model(), /*with_head=*/true, /*with_classifier=*/false);
  restore_model(pre, ck);
  const auto fin_params = fin.encoder_params();
  const auto pre_params = pre.encoder_params();
  REQUIRE(fin_params.size() == pre_params.size());
  for (std::size_t i = 0; i < fin_params.size(); ++i) {
    CHECK(fin_params[i]->name == pre_params[i]->name);
    CHECK(std::memcmp(fin_params[i]->value.data(), pre_params[i]->value.data(),
                      static_cast<std::size_t>(fin_params[i]->value.numel()) * sizeof(float)) == 0);
  }
}

TEST_CASE("full restore into a complete pretrain model drops nothing") {
  const Checkpoint ck = sample_checkpoint(6);
  Model<float> model(small_model(), /*with_head=*/true, /*with_classifier=*/false);
  model.init_params(123);
  CHECK(restore_model(model, ck).empty());
  Checkpoint again = snapshot_model(model, ck.phase, ck.config, ck.rng_state, ck.step);
  CHECK(same_tensors(again, ck));
}

TEST_CASE("missing tensors and shape mismatches are data errors") {
  SUBCASE("a finetune model needs a classifier the pretrain checkpoint lacks") {
    const Checkpoint ck = sample_checkpoint(7);
    Model<float> fin(small_model(), /*with_head=*/false, /*with_classifier=*/true);
    fin.init_params(1);
    try {
      restore_model(fin, ck);
      FAIL("expected DataError");
    } catch (const DataError& e) {
      CHECK(std::string(e.what()).find("classifier") != std::string::npos);
    }
  }
  SUBCASE("same names, different embedding width") {
    const Checkpoint ck = sample_checkpoint(8);
    ModelConfig narrow = small_model();
    narrow.encoder.embedding_dim = 8;
    narrow.head.dim = 4;
    Model<float> model(narrow, /*with_head=*/true, /*with_classifier=*/false);
    model.init_params(1);
    CHECK_THROWS_AS(restore_model(model, ck), DataError);
  }
}

TEST_CASE("embedding store round trip") {
  EmbeddingStore store;
  store.corpus_id = "fixture";
  store.embedding_dim = 3;
  const float rows[4][3] = {{1, 2, 3}, {4, 5, 6}, {-1, 0, 1}, {0.5f, 0.25f, 0.125f}};
  const FrameRef refs[4] = {{0, 0}, {0, 9}, {2, 4}, {5, 100}};
  for (int i = 0; i < 4; ++i) store.append(refs[i], rows[i], 3);

  const fs::path path = work_dir() / "store.tce";
  save_embeddings(path.string(), store);
  const EmbeddingStore back = load_embeddings(path.string());

  CHECK(back.corpus_id == "fixture");
  CHECK(back.embedding_dim == 3);
  REQUIRE(back.rows() == 4);
  for (int i = 0; i < 4; ++i) {
    CHECK(back.refs[static_cast<std::size_t>(i)] == refs[i]);
    CHECK(std::memcmp(back.row(i), rows[i], 3 * sizeof(float)) == 0);
  }
  CHECK(back.find(FrameRef{2, 4}) == 2);
  CHECK(back.find(FrameRef{2, 5}) == -1);

  SUBCASE("appending a row of the wrong width is a data error") {
    EmbeddingStore s = store;
    const float short_row[2] = {1, 2};
    CHECK_THROWS_AS(s.append(FrameRef{9, 9}, short_row, 2), DataError);
  }
  SUBCASE("tampering invalidates the store file too") {
    std::vector<char> bytes = read_bytes(path);
    bytes[bytes.size() / 2] = static_cast<char>(bytes[bytes.size() / 2] ^ 0x01);
    const fs::path bad = work_dir() / "store_bad.tce";
    write_bytes(bad, bytes);
    CHECK_THROWS_AS(load_embeddings(bad.string()), DataError);
  }
  SUBCASE("a checkpoint file does not load as an embedding store") {
    const fs::path ckpath = work_dir() / "kind.tcs";
    save_checkpoint(ckpath.string(), sample_checkpoint());
    CHECK_THROWS_AS(load_embeddings(ckpath.string()), DataError);
  }
}

TEST_CASE("exporting embeddings twice produces identical files") {
  const CorpusReader& corpus = fixture_corpus();
  Model<float> model(small_model(), /*with_head=*/true, /*with_classifier=*/false);
  model.init_params(77);

  const EmbeddingStore a = export_embeddings(model, corpus, FrameSelector::all());
  const EmbeddingStore b = export_embeddings(model, corpus, FrameSelector::all());
  const fs::path pa = work_dir() / "a.tce";
  const fs::path pb = work_dir() / "b.tce";
  save_embeddings(pa.string(), a);
  save_embeddings(pb.string(), b);
  CHECK(read_bytes(pa) == read_bytes(pb));
}

TEST_CASE("store rows cover exactly the selected frames in order") {
  const CorpusReader& corpus = fixture_corpus();
  Model<float> model(small_model(), /*with_head=*/true, /*with_classifier=*/false);
  model.init_params(77);

  SUBCASE("whole corpus") {
    const EmbeddingStore store = export_embeddings(model, corpus, FrameSelector::all());
    CHECK(store.rows() == 3 * 40);
    CHECK(store.corpus_id == "persist-fixture");
    CHECK(store.embedding_dim == 16);
    for (std::int64_t i = 1; i < store.rows(); ++i) {
      CHECK(store.refs[static_cast<std::size_t>(i - 1)] < store.refs[static_cast<std::size_t>(i)]);
    }
  }
  SUBCASE("one video") {
    const EmbeddingStore store =
        export_embeddings(model, corpus, FrameSelector::for_videos({1}));
    CHECK(store.rows() == 40);
    for (const FrameRef& ref : store.refs) CHECK(ref.video_id == 1);
  }
  SUBCASE("an explicit frame list") {
    FrameSelector sel;
    sel.kind = FrameSelector::Kind::Frames;
    sel.frames = {{0, 3}, {2, 39}, {1, 0}};
    const EmbeddingStore store = export_embeddings(model, corpus, sel);
    CHECK(store.rows() == 3);
  }
}

TEST_CASE("ten random store rows match a fresh encode exactly") {
  const CorpusReader& corpus = fixture_corpus();
  Model<float> model(small_model(), /*with_head=*/true, /*with_classifier=*/false);
  model.init_params(77);
  const EmbeddingStore store = export_embeddings(model, corpus, FrameSelector::all());

  Rng rng(31);
  for (int round = 0; round < 10; ++round) {
    const std::int64_t row = rng.uniform_int(store.rows());
    const Frame frame = corpus.frame(store.refs[static_cast<std::size_t>(row)]);
    Tensor<float> pixels({1, frame.pixels.shape()[0], frame.pixels.shape()[1],
                          frame.pixels.shape()[2]});
    std::memcpy(pixels.data(), frame.pixels.data(),
                static_cast<std::size_t>(frame.pixels.numel()) * sizeof(float));
    const Tensor<float> emb = model.encode(pixels);
    REQUIRE(emb.numel() == store.embedding_dim);
    CHECK(std::memcmp(emb.data(), store.row(row),
                      static_cast<std::size_t>(store.embedding_dim) * sizeof(float)) == 0);
  }
}

TEST_CASE("saves are atomic: no temp file debris, target appears complete") {
  const fs::path path = work_dir() / "atomic.tcs";
  save_checkpoint(path.string(), sample_checkpoint());
  CHECK(fs::exists(path));
  int entries = 0;
  for (const auto& entry : fs::directory_iterator(work_dir())) {
    const std::string name = entry.path().filename().string();
    CHECK(name.find(".tmp") == std::string::npos);
    ++entries;
  }
  CHECK(entries > 0);
  CHECK_NOTHROW(load_checkpoint(path.string()));
}

}  // TEST_SUITE
