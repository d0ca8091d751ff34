#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <functional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "hirec/core.hpp"
#include "hirec/hashing.hpp"
#include "hirec/result.hpp"

namespace hirec {

inline constexpr size_t kDefaultDimension = 256;
inline constexpr double kUnitNormTolerance = 1e-6;

// ---------------------------------------------------------------------------
// embedding vectors
// ---------------------------------------------------------------------------

/// Fixed-dimension unit vector of 32-bit floats. All stored and query
/// vectors are unit-normalized, so cosine similarity reduces to a dot
/// product.
class EmbeddingVector {
public:
    /// Validates length against `dimension` and the unit-norm invariant.
    static Result<EmbeddingVector> from_raw(std::vector<float> values, size_t dimension) {
        if (values.size() != dimension) {
            return make_error(ErrorCode::DIMENSION_MISMATCH,
                              "vector has length " + std::to_string(values.size()) +
                                  ", expected " + std::to_string(dimension));
        }
        double norm_sq = 0.0;
        for (float v : values) norm_sq += static_cast<double>(v) * static_cast<double>(v);
        if (std::abs(std::sqrt(norm_sq) - 1.0) > kUnitNormTolerance) {
            return make_error(ErrorCode::INVALID_ARGUMENT,
                              "vector is not unit-normalized (norm " +
                                  std::to_string(std::sqrt(norm_sq)) + ")");
        }
        return EmbeddingVector(std::move(values));
    }

    /// Scales `values` to unit length. Fails on the zero vector.
    static Result<EmbeddingVector> normalized(std::vector<float> values) {
        double norm_sq = 0.0;
        for (float v : values) norm_sq += static_cast<double>(v) * static_cast<double>(v);
        if (norm_sq == 0.0) {
            return make_error(ErrorCode::INVALID_ARGUMENT, "cannot normalize a zero vector");
        }
        const double inv = 1.0 / std::sqrt(norm_sq);
        for (float& v : values) v = static_cast<float>(static_cast<double>(v) * inv);
        return EmbeddingVector(std::move(values));
    }

    const std::vector<float>& values() const { return values_; }
    size_t dimension() const { return values_.size(); }

    bool operator==(const EmbeddingVector&) const = default;

private:
    explicit EmbeddingVector(std::vector<float> values) : values_(std::move(values)) {}
    std::vector<float> values_;
};

/// Similarity of two unit vectors: the dot product, accumulated in double
/// precision over ascending indices. The sequential order is part of the
/// contract — it makes independently written scans bit-identical.
inline double dot_similarity(const EmbeddingVector& a, const EmbeddingVector& b) {
    const auto& x = a.values();
    const auto& y = b.values();
    double acc = 0.0;
    for (size_t i = 0; i < x.size(); ++i) {
        acc += static_cast<double>(x[i]) * static_cast<double>(y[i]);
    }
    return acc;
}

// ---------------------------------------------------------------------------
// index entries and hits
// ---------------------------------------------------------------------------

struct IndexEntry {
    DocumentId doc_id;
    EmbeddingVector vector;
    Tier tier;
    std::string department;
};

struct RetrievalHit {
    DocumentId doc_id;
    double similarity;

    bool operator==(const RetrievalHit&) const = default;
};

/// Predicate over (tier, department); an empty function means "match all".
using SearchFilter = std::function<bool(Tier, const std::string&)>;

// ---------------------------------------------------------------------------
// snapshot format
// ---------------------------------------------------------------------------
//
// Little-endian binary, documented field-by-field in docs/snapshot_format.md:
//
//   magic     4 bytes  "HVIX"
//   version   u32      currently 1
//   dimension u32
//   count     u64
//   records   count times:
//               id_len   u32, id bytes
//               tier     u8 (0 department, 1 item)
//               dept_len u32, department bytes
//               values   dimension * f32
//   crc32     u32      over every preceding byte
//
// Records appear in insertion order and the format carries no timestamps,
// so saving an unchanged index is byte-identical.

inline constexpr char kSnapshotMagic[4] = {'H', 'V', 'I', 'X'};
inline constexpr uint32_t kSnapshotVersion = 1;

namespace detail {

inline void append_u32_le(std::string& out, uint32_t v) {
    out.push_back(static_cast<char>(v & 0xFF));
    out.push_back(static_cast<char>((v >> 8) & 0xFF));
    out.push_back(static_cast<char>((v >> 16) & 0xFF));
    out.push_back(static_cast<char>((v >> 24) & 0xFF));
}

inline void append_u64_le(std::string& out, uint64_t v) {
    for (int shift = 0; shift < 64; shift += 8) {
        out.push_back(static_cast<char>((v >> shift) & 0xFF));
    }
}

inline void append_f32_le(std::string& out, float v) {
    append_u32_le(out, std::bit_cast<uint32_t>(v));
}

inline void append_string(std::string& out, const std::string& s) {
    append_u32_le(out, static_cast<uint32_t>(s.size()));
    out.append(s);
}

class SnapshotReader {
public:
    SnapshotReader(std::string_view data) : data_(data) {}

    bool read_bytes(char* dst, size_t n) {
        if (pos_ + n > data_.size()) return false;
        std::memcpy(dst, data_.data() + pos_, n);
        pos_ += n;
        return true;
    }

    bool read_u32(uint32_t& v) {
        unsigned char b[4];
        if (!read_bytes(reinterpret_cast<char*>(b), 4)) return false;
        v = static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
            (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
        return true;
    }

    bool read_u64(uint64_t& v) {
        unsigned char b[8];
        if (!read_bytes(reinterpret_cast<char*>(b), 8)) return false;
        v = 0;
        for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
        return true;
    }

    bool read_f32(float& v) {
        uint32_t bits = 0;
        if (!read_u32(bits)) return false;
        v = std::bit_cast<float>(bits);
        return true;
    }

    bool read_string(std::string& s) {
        uint32_t len = 0;
        if (!read_u32(len)) return false;
        if (pos_ + len > data_.size()) return false;
        s.assign(data_.data() + pos_, len);
        pos_ += len;
        return true;
    }

    size_t position() const { return pos_; }

private:
    std::string_view data_;
    size_t pos_ = 0;
};

}  // namespace detail

// ---------------------------------------------------------------------------
// the index
// ---------------------------------------------------------------------------

/// Exact cosine k-NN over unit vectors: a flat scan with deterministic
/// ordering. Concurrent readers are safe; add() and load() need exclusive
/// access. The engine mutates only during ingestion, before serving.
class VectorIndex {
public:
    explicit VectorIndex(size_t dimension = kDefaultDimension) : dimension_(dimension) {}

    size_t dimension() const { return dimension_; }
    size_t size() const { return entries_.size(); }
    const std::vector<IndexEntry>& entries() const { return entries_; }

    Result<void> add(IndexEntry entry) {
        if (entry.vector.dimension() != dimension_) {
            return make_error(ErrorCode::DIMENSION_MISMATCH,
                              "entry '" + entry.doc_id.str() + "' has dimension " +
                                  std::to_string(entry.vector.dimension()) + ", index expects " +
                                  std::to_string(dimension_));
        }
        if (id_to_slot_.count(entry.doc_id.str()) != 0) {
            return make_error(ErrorCode::DUPLICATE_ID,
                              "doc id '" + entry.doc_id.str() + "' already indexed");
        }
        entry.department = canonicalize_department(entry.department);
        id_to_slot_.emplace(entry.doc_id.str(), entries_.size());
        entries_.push_back(std::move(entry));
        return ok();
    }

    /// Top-k by similarity, non-increasing; equal similarities break by
    /// ascending doc id. Only entries passing `filter` are considered.
    Result<std::vector<RetrievalHit>> search(const EmbeddingVector& query, int k,
                                             const SearchFilter& filter = {}) const {
        if (query.dimension() != dimension_) {
            return make_error(ErrorCode::DIMENSION_MISMATCH,
                              "query has dimension " + std::to_string(query.dimension()) +
                                  ", index expects " + std::to_string(dimension_));
        }
        if (k < 1) {
            return make_error(ErrorCode::INVALID_ARGUMENT, "k must be >= 1");
        }
        std::vector<RetrievalHit> hits;
        hits.reserve(entries_.size());
        for (const auto& entry : entries_) {
            if (filter && !filter(entry.tier, entry.department)) continue;
            hits.push_back(RetrievalHit{entry.doc_id, dot_similarity(query, entry.vector)});
        }
        std::sort(hits.begin(), hits.end(), [](const RetrievalHit& a, const RetrievalHit& b) {
            if (a.similarity != b.similarity) return a.similarity > b.similarity;
            return a.doc_id < b.doc_id;
        });
        if (hits.size() > static_cast<size_t>(k)) {
            hits.erase(hits.begin() + k, hits.end());
        }
        return hits;
    }

    std::optional<size_t> find(const std::string& doc_id) const {
        auto it = id_to_slot_.find(doc_id);
        if (it == id_to_slot_.end()) return std::nullopt;
        return it->second;
    }

    /// Serializes the index to the snapshot format above.
    Result<void> save(const std::string& path) const {
        std::string payload;
        payload.append(kSnapshotMagic, sizeof(kSnapshotMagic));
        detail::append_u32_le(payload, kSnapshotVersion);
        detail::append_u32_le(payload, static_cast<uint32_t>(dimension_));
        detail::append_u64_le(payload, static_cast<uint64_t>(entries_.size()));
        for (const auto& entry : entries_) {
            detail::append_string(payload, entry.doc_id.str());
            payload.push_back(static_cast<char>(entry.tier));
            detail::append_string(payload, entry.department);
            for (float v : entry.vector.values()) detail::append_f32_le(payload, v);
        }
        detail::append_u32_le(payload, crc32(payload));

        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out) {
            return make_error(ErrorCode::IO_ERROR, "cannot open '" + path + "' for writing");
        }
        out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
        out.flush();
        if (!out) {
            return make_error(ErrorCode::IO_ERROR, "short write to '" + path + "'");
        }
        return ok();
    }

    static Result<VectorIndex> load(const std::string& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) {
            return make_error(ErrorCode::IO_ERROR, "cannot open '" + path + "' for reading");
        }
        std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        if (in.bad()) {
            return make_error(ErrorCode::IO_ERROR, "read failure on '" + path + "'");
        }

        constexpr size_t kMinSize = 4 + 4 + 4 + 8 + 4;  // header + crc
        if (data.size() < kMinSize ||
            std::memcmp(data.data(), kSnapshotMagic, sizeof(kSnapshotMagic)) != 0) {
            return make_error(ErrorCode::CORRUPT_SNAPSHOT, "'" + path + "' is not an index snapshot");
        }

        // Checksum covers everything before the trailing CRC word.
        detail::SnapshotReader crc_reader(std::string_view(data).substr(data.size() - 4));
        uint32_t stored_crc = 0;
        crc_reader.read_u32(stored_crc);
        const uint32_t actual_crc = crc32(data.data(), data.size() - 4);
        if (stored_crc != actual_crc) {
            return make_error(ErrorCode::CORRUPT_SNAPSHOT, "checksum mismatch in '" + path + "'");
        }

        detail::SnapshotReader reader(std::string_view(data).substr(4, data.size() - 8));
        uint32_t version = 0;
        uint32_t dimension = 0;
        uint64_t count = 0;
        if (!reader.read_u32(version)) {
            return make_error(ErrorCode::CORRUPT_SNAPSHOT, "truncated header in '" + path + "'");
        }
        if (version != kSnapshotVersion) {
            return make_error(ErrorCode::FORMAT_VERSION_MISMATCH,
                              "snapshot version " + std::to_string(version) + ", expected " +
                                  std::to_string(kSnapshotVersion));
        }
        if (!reader.read_u32(dimension) || !reader.read_u64(count)) {
            return make_error(ErrorCode::CORRUPT_SNAPSHOT, "truncated header in '" + path + "'");
        }

        VectorIndex index(dimension);
        for (uint64_t i = 0; i < count; ++i) {
            std::string id_text;
            std::string department;
            char tier_byte = 0;
            if (!reader.read_string(id_text) || !reader.read_bytes(&tier_byte, 1) ||
                !reader.read_string(department)) {
                return make_error(ErrorCode::CORRUPT_SNAPSHOT, "truncated record in '" + path + "'");
            }
            if (tier_byte != 0 && tier_byte != 1) {
                return make_error(ErrorCode::CORRUPT_SNAPSHOT, "invalid tier byte in '" + path + "'");
            }
            std::vector<float> values(dimension);
            for (uint32_t d = 0; d < dimension; ++d) {
                if (!reader.read_f32(values[d])) {
                    return make_error(ErrorCode::CORRUPT_SNAPSHOT,
                                      "truncated record in '" + path + "'");
                }
            }
            auto doc_id = DocumentId::create(std::move(id_text));
            if (!doc_id.ok()) {
                return make_error(ErrorCode::CORRUPT_SNAPSHOT, "invalid doc id in '" + path + "'");
            }
            auto vector = EmbeddingVector::from_raw(std::move(values), dimension);
            if (!vector.ok()) {
                return make_error(ErrorCode::CORRUPT_SNAPSHOT,
                                  "non-unit vector for '" + doc_id.value().str() + "' in '" + path + "'");
            }
            auto added = index.add(IndexEntry{std::move(doc_id).value(), std::move(vector).value(),
                                              static_cast<Tier>(tier_byte), std::move(department)});
            if (!added.ok()) {
                return make_error(ErrorCode::CORRUPT_SNAPSHOT,
                                  "duplicate record in '" + path + "': " + added.error().message);
            }
        }
        if (reader.position() != data.size() - 8) {
            return make_error(ErrorCode::CORRUPT_SNAPSHOT, "trailing bytes in '" + path + "'");
        }
        return index;
    }

private:
    size_t dimension_;
    std::vector<IndexEntry> entries_;
    std::unordered_map<std::string, size_t> id_to_slot_;
};

}  // namespace hirec
