#include "dacl/snapshot.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "dacl/errors.hpp"

static_assert(std::endian::native == std::endian::little,
              "snapshot serialization assumes a little-endian host");

namespace dacl {

namespace {

template <typename T>
void put(std::vector<std::uint8_t>& out, T v) {
  const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
  out.insert(out.end(), p, p + sizeof(T));
}

struct Reader {
  const std::uint8_t* p;
  const std::uint8_t* end;

  template <typename T>
  T get() {
    if (end - p < static_cast<std::ptrdiff_t>(sizeof(T))) {
      throw DataError("snapshot: truncated file");
    }
    T v;
    std::memcpy(&v, p, sizeof(T));
    p += sizeof(T);
    return v;
  }

  std::string get_string(std::size_t n) {
    if (end - p < static_cast<std::ptrdiff_t>(n)) throw DataError("snapshot: truncated file");
    std::string s(reinterpret_cast<const char*>(p), n);
    p += n;
    return s;
  }
};

}  // namespace

std::vector<std::uint8_t> snapshot_bytes(const ModelParams& params) {
  std::vector<std::uint8_t> out;
  out.insert(out.end(), kSnapshotMagic, kSnapshotMagic + sizeof(kSnapshotMagic));
  put(out, kSnapshotVersion);

  std::uint32_t group_count = 0;
  for_each_group(params, [&](const std::string&, const std::vector<const Matrix*>&) {
    ++group_count;
  });
  put(out, group_count);

  for_each_group(params, [&](const std::string& name, const std::vector<const Matrix*>& mats) {
    put(out, static_cast<std::uint32_t>(name.size()));
    out.insert(out.end(), name.begin(), name.end());
    put(out, static_cast<std::uint32_t>(mats.size()));
    for (const Matrix* m : mats) {
      put(out, static_cast<std::uint64_t>(m->rows()));
      put(out, static_cast<std::uint64_t>(m->cols()));
    }
  });
  for_each_group(params, [&](const std::string&, const std::vector<const Matrix*>& mats) {
    for (const Matrix* m : mats) {
      auto d = m->data();
      const auto* raw = reinterpret_cast<const std::uint8_t*>(d.data());
      out.insert(out.end(), raw, raw + d.size() * sizeof(double));
    }
  });
  return out;
}

void save_snapshot(const std::string& path, const ModelParams& params) {
  const std::vector<std::uint8_t> bytes = snapshot_bytes(params);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw DataError("snapshot: cannot open '" + path + "' for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()),
          static_cast<std::streamsize>(bytes.size()));
  if (!f) throw DataError("snapshot: write to '" + path + "' failed");
}

void load_snapshot(const std::string& path, ModelParams& params) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("snapshot: cannot open '" + path + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                  std::istreambuf_iterator<char>());
  Reader r{bytes.data(), bytes.data() + bytes.size()};

  const std::string magic = r.get_string(sizeof(kSnapshotMagic));
  if (std::memcmp(magic.data(), kSnapshotMagic, sizeof(kSnapshotMagic)) != 0) {
    throw DataError("snapshot: '" + path + "' is not a DACLSNAP file");
  }
  const auto version = r.get<std::uint32_t>();
  if (version != kSnapshotVersion) {
    throw DataError("snapshot: unsupported version " + std::to_string(version));
  }

  // Collect the expected walk up front, then verify the header against it.
  std::vector<std::pair<std::string, std::vector<Matrix*>>> groups;
  for_each_group(params, [&](const std::string& name, const std::vector<Matrix*>& mats) {
    groups.emplace_back(name, mats);
  });

  const auto group_count = r.get<std::uint32_t>();
  if (group_count != groups.size()) {
    throw DataError("snapshot: file has " + std::to_string(group_count) +
                    " groups, model expects " + std::to_string(groups.size()));
  }
  for (auto& [name, mats] : groups) {
    const auto name_len = r.get<std::uint32_t>();
    const std::string fname = r.get_string(name_len);
    if (fname != name) {
      throw DataError("snapshot: group '" + fname + "' where model expects '" + name + "'");
    }
    const auto mat_count = r.get<std::uint32_t>();
    if (mat_count != mats.size()) {
      throw DataError("snapshot: group '" + name + "' has " + std::to_string(mat_count) +
                      " matrices, model expects " + std::to_string(mats.size()));
    }
    for (Matrix* m : mats) {
      const auto rows = r.get<std::uint64_t>();
      const auto cols = r.get<std::uint64_t>();
      if (rows != m->rows() || cols != m->cols()) {
        throw DataError("snapshot: group '" + name + "' matrix is " + std::to_string(rows) +
                        "x" + std::to_string(cols) + ", model expects " + m->shape_str());
      }
    }
  }
  for (auto& [name, mats] : groups) {
    for (Matrix* m : mats) {
      auto d = m->data();
      const std::size_t nbytes = d.size() * sizeof(double);
      if (static_cast<std::size_t>(r.end - r.p) < nbytes) {
        throw DataError("snapshot: truncated payload in group '" + name + "'");
      }
      std::memcpy(d.data(), r.p, nbytes);
      r.p += nbytes;
    }
  }
  if (r.p != r.end) throw DataError("snapshot: trailing bytes after payload");
}

}  // namespace dacl
