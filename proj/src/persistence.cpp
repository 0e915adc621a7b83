#include "tcssl/persistence.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <set>

#include "tcssl/io_util.hpp"

static_assert(std::endian::native == std::endian::little,
              "on-disk format is little-endian and written via memcpy");

namespace tcssl {

namespace {

constexpr char kMagic[8] = {'T', 'C', 'S', 'S', 'L', 'B', 'I', 'N'};

void append_raw(std::string& out, const void* data, std::size_t size) {
  out.append(static_cast<const char*>(data), size);
}

template <typename T>
void append_value(std::string& out, T v) {
  append_raw(out, &v, sizeof(v));
}

// One payload section: name + dtype declared in the header, bytes in the body.
struct Section {
  std::string name;
  std::string dtype;  // "f32" | "i64"
  std::vector<std::int64_t> shape;
  std::string bytes;
};

std::string pack_container(const nlohmann::json& meta, const std::vector<Section>& sections) {
  nlohmann::json header = meta;
  header["sections"] = nlohmann::json::array();
  for (const Section& s : sections) {
    header["sections"].push_back({{"name", s.name}, {"dtype", s.dtype}, {"shape", s.shape}});
  }
  const std::string header_bytes = header.dump();

  std::string out;
  append_raw(out, kMagic, sizeof(kMagic));
  append_value<std::uint32_t>(out, kContainerVersion);
  append_value<std::uint64_t>(out, header_bytes.size());
  out += header_bytes;
  for (const Section& s : sections) out += s.bytes;
  const std::uint32_t crc = crc32_ieee(out.data(), out.size());
  append_value<std::uint32_t>(out, crc);
  return out;
}

std::size_t dtype_size(const std::string& dtype, const std::string& path) {
  if (dtype == "f32") return 4;
  if (dtype == "i64") return 8;
  throw DataError("'" + path + "': unknown section dtype '" + dtype + "'");
}

std::pair<nlohmann::json, std::vector<Section>> unpack_container(const std::string& path,
                                                                 const std::string& kind) {
  const std::string raw = read_file(path);
  if (raw.size() < sizeof(kMagic) + 4 + 8 + 4 ||
      std::memcmp(raw.data(), kMagic, sizeof(kMagic)) != 0) {
    throw DataError("'" + path + "': not a " + kind + " file");
  }
  const std::uint32_t stored_crc =
      *reinterpret_cast<const std::uint32_t*>(raw.data() + raw.size() - 4);
  const std::uint32_t actual_crc = crc32_ieee(raw.data(), raw.size() - 4);
  if (stored_crc != actual_crc) {
    throw DataError("'" + path + "': checksum mismatch, file is corrupt or truncated");
  }
  std::uint32_t version = 0;
  std::memcpy(&version, raw.data() + 8, 4);
  if (version != kContainerVersion) {
    throw DataError("'" + path + "': format version " + std::to_string(version) +
                    ", expected " + std::to_string(kContainerVersion));
  }
  std::uint64_t header_len = 0;
  std::memcpy(&header_len, raw.data() + 12, 8);
  const std::size_t header_off = 20;
  if (header_off + header_len + 4 > raw.size()) {
    throw DataError("'" + path + "': header length exceeds file size");
  }
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(raw.substr(header_off, header_len));
  } catch (const nlohmann::json::exception& e) {
    throw DataError("'" + path + "': bad header: " + e.what());
  }
  if (header.value("kind", "") != kind) {
    throw DataError("'" + path + "': kind '" + header.value("kind", "") + "', expected '" + kind + "'");
  }

  std::vector<Section> sections;
  std::size_t off = header_off + header_len;
  for (const auto& js : header.at("sections")) {
    Section s;
    s.name = js.at("name").get<std::string>();
    s.dtype = js.at("dtype").get<std::string>();
    s.shape = js.at("shape").get<std::vector<std::int64_t>>();
    std::int64_t n = 1;
    for (std::int64_t d : s.shape) n *= d;
    const std::size_t nbytes = static_cast<std::size_t>(n) * dtype_size(s.dtype, path);
    if (off + nbytes > raw.size() - 4) {
      throw DataError("'" + path + "': section '" + s.name + "' runs past end of file");
    }
    s.bytes = raw.substr(off, nbytes);
    off += nbytes;
    sections.push_back(std::move(s));
  }
  if (off != raw.size() - 4) {
    throw DataError("'" + path + "': trailing bytes after declared sections");
  }
  return {header, std::move(sections)};
}

}  // namespace

std::uint32_t crc32_ieee(const void* data, std::size_t size, std::uint32_t seed) {
  static const auto table = [] {
    std::array<std::uint32_t, 256> t{};
    for (std::uint32_t i = 0; i < 256; ++i) {
      std::uint32_t c = i;
      for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
      t[i] = c;
    }
    return t;
  }();
  std::uint32_t crc = seed ^ 0xFFFFFFFFu;
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < size; ++i) crc = table[(crc ^ p[i]) & 0xFFu] ^ (crc >> 8);
  return crc ^ 0xFFFFFFFFu;
}

const NamedTensor* Checkpoint::find(const std::string& name) const {
  for (const NamedTensor& t : tensors) {
    if (t.name == name) return &t;
  }
  return nullptr;
}

void save_checkpoint(const std::string& path, const Checkpoint& ck) {
  nlohmann::json meta{{"kind", "checkpoint"},
                      {"phase", ck.phase},
                      {"step", ck.step},
                      {"rng_state", ck.rng_state},
                      {"config", ck.config}};
  std::vector<Section> sections;
  for (const NamedTensor& t : ck.tensors) {
    Section s;
    s.name = t.name;
    s.dtype = "f32";
    s.shape = t.shape;
    s.bytes.assign(reinterpret_cast<const char*>(t.data.data()), t.data.size() * sizeof(float));
    sections.push_back(std::move(s));
  }
  const std::string blob = pack_container(meta, sections);
  write_file_atomic(path, blob.data(), blob.size());
}

Checkpoint load_checkpoint(const std::string& path) {
  auto [header, sections] = unpack_container(path, "checkpoint");
  Checkpoint ck;
  ck.phase = header.value("phase", "");
  ck.step = header.value("step", std::int64_t{0});
  ck.rng_state = header.value("rng_state", "");
  ck.config = header.value("config", nlohmann::json::object());
  for (Section& s : sections) {
    if (s.dtype != "f32") throw DataError("'" + path + "': tensor '" + s.name + "' is not f32");
    NamedTensor t;
    t.name = s.name;
    t.shape = s.shape;
    t.data.resize(s.bytes.size() / sizeof(float));
    std::memcpy(t.data.data(), s.bytes.data(), s.bytes.size());
    ck.tensors.push_back(std::move(t));
  }
  return ck;
}

std::int64_t EmbeddingStore::find(const FrameRef& ref) const {
  for (std::size_t i = 0; i < refs.size(); ++i) {
    if (refs[i] == ref) return static_cast<std::int64_t>(i);
  }
  return -1;
}

void EmbeddingStore::append(const FrameRef& ref, const float* vec, std::int64_t dim) {
  if (embedding_dim == 0) embedding_dim = dim;
  if (dim != embedding_dim) {
    throw DataError("embedding store: appending dim " + std::to_string(dim) + " to a store of dim " +
                    std::to_string(embedding_dim));
  }
  refs.push_back(ref);
  vectors.insert(vectors.end(), vec, vec + dim);
}

void save_embeddings(const std::string& path, const EmbeddingStore& store) {
  nlohmann::json meta{{"kind", "embeddings"},
                      {"corpus_id", store.corpus_id},
                      {"embedding_dim", store.embedding_dim},
                      {"rows", store.rows()}};
  Section refs;
  refs.name = "refs";
  refs.dtype = "i64";
  refs.shape = {store.rows(), 2};
  std::vector<std::int64_t> flat;
  flat.reserve(store.refs.size() * 2);
  for (const FrameRef& r : store.refs) {
    flat.push_back(r.video_id);
    flat.push_back(r.frame_index);
  }
  refs.bytes.assign(reinterpret_cast<const char*>(flat.data()),
                    flat.size() * sizeof(std::int64_t));
  Section vecs;
  vecs.name = "vectors";
  vecs.dtype = "f32";
  vecs.shape = {store.rows(), store.embedding_dim};
  vecs.bytes.assign(reinterpret_cast<const char*>(store.vectors.data()),
                    store.vectors.size() * sizeof(float));
  const std::string blob = pack_container(meta, {refs, vecs});
  write_file_atomic(path, blob.data(), blob.size());
}

EmbeddingStore load_embeddings(const std::string& path) {
  auto [header, sections] = unpack_container(path, "embeddings");
  EmbeddingStore store;
  store.corpus_id = header.value("corpus_id", "");
  store.embedding_dim = header.value("embedding_dim", std::int64_t{0});
  const Section* refs = nullptr;
  const Section* vecs = nullptr;
  for (const Section& s : sections) {
    if (s.name == "refs") refs = &s;
    if (s.name == "vectors") vecs = &s;
  }
  if (refs == nullptr || vecs == nullptr) {
    throw DataError("'" + path + "': missing refs or vectors section");
  }
  const auto rows = static_cast<std::int64_t>(refs->bytes.size() / (2 * sizeof(std::int64_t)));
  store.refs.resize(static_cast<std::size_t>(rows));
  for (std::int64_t i = 0; i < rows; ++i) {
    std::int64_t pair[2];
    std::memcpy(pair, refs->bytes.data() + i * 2 * sizeof(std::int64_t), sizeof(pair));
    store.refs[static_cast<std::size_t>(i)] = FrameRef{pair[0], pair[1]};
  }
  store.vectors.resize(vecs->bytes.size() / sizeof(float));
  std::memcpy(store.vectors.data(), vecs->bytes.data(), vecs->bytes.size());
  if (store.rows() * store.embedding_dim != static_cast<std::int64_t>(store.vectors.size())) {
    throw DataError("'" + path + "': vector payload does not match rows x embedding_dim");
  }
  return store;
}

Checkpoint snapshot_model(Model<float>& model, const std::string& phase,
                          const nlohmann::json& config_echo, const std::string& rng_state,
                          std::int64_t step) {
  Checkpoint ck;
  ck.phase = phase;
  ck.step = step;
  ck.rng_state = rng_state;
  ck.config = config_echo;
  for (Param<float>* p : model.params()) {
    NamedTensor t;
    t.name = p->name;
    t.shape = p->value.shape();
    t.data.assign(p->value.data(), p->value.data() + p->value.numel());
    ck.tensors.push_back(std::move(t));
  }
  return ck;
}

std::vector<std::string> restore_params(const std::vector<Param<float>*>& params,
                                        const Checkpoint& ck) {
  std::set<std::string> consumed;
  for (Param<float>* p : params) {
    const NamedTensor* t = ck.find(p->name);
    if (t == nullptr) throw DataError("checkpoint: missing tensor '" + p->name + "'");
    if (t->shape != p->value.shape()) {
      throw DataError("checkpoint: tensor '" + p->name + "' has mismatched shape");
    }
    std::copy(t->data.begin(), t->data.end(), p->value.data());
    consumed.insert(p->name);
  }
  std::vector<std::string> dropped;
  for (const NamedTensor& t : ck.tensors) {
    if (consumed.count(t.name) == 0) dropped.push_back(t.name);
  }
  return dropped;
}

std::vector<std::string> restore_model(Model<float>& model, const Checkpoint& ck) {
  return restore_params(model.params(), ck);
}

EmbeddingStore export_embeddings(Model<float>& model, const CorpusReader& corpus,
                                 const FrameSelector& selector) {
  const std::vector<Frame> frames = corpus.load(selector);
  EmbeddingStore store;
  store.corpus_id = corpus.manifest().corpus_id;
  store.embedding_dim = model.config().encoder.embedding_dim;
  const FrameShape shape = corpus.manifest().frame_shape;
  const std::int64_t chunk = 256;
  for (std::size_t begin = 0; begin < frames.size(); begin += chunk) {
    const auto count =
        static_cast<std::int64_t>(std::min<std::size_t>(chunk, frames.size() - begin));
    Tensor<float> pixels({count, shape.channels, shape.height, shape.width});
    for (std::int64_t i = 0; i < count; ++i) {
      const Frame& f = frames[begin + static_cast<std::size_t>(i)];
      std::memcpy(pixels.data() + i * shape.numel(), f.pixels.data(),
                  static_cast<std::size_t>(shape.numel()) * sizeof(float));
    }
    const Tensor<float> emb = model.encode(pixels);
    for (std::int64_t i = 0; i < count; ++i) {
      store.append(frames[begin + static_cast<std::size_t>(i)].ref, emb.data() + i * store.embedding_dim,
                   store.embedding_dim);
    }
  }
  return store;
}

}  // namespace tcssl
