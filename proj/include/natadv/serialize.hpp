#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "natadv/errors.hpp"
#include "natadv/mat.hpp"
#include "natadv/nn.hpp"

namespace natadv {

inline std::uint64_t fnv1a64(const void* data, std::size_t n, std::uint64_t h = 0xcbf29ce484222325ULL) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::uint64_t fnv1a64_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw NotFoundError("cannot open for checksum: " + path.string());
    std::uint64_t h = 0xcbf29ce484222325ULL;
    char buf[65536];
    while (in.read(buf, sizeof buf) || in.gcount() > 0)
        h = fnv1a64(buf, static_cast<std::size_t>(in.gcount()), h);
    return h;
}

inline void write_file_atomic(const std::filesystem::path& path, const void* data, std::size_t n) {
    namespace fs = std::filesystem;
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
        out.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
        if (!out) throw std::runtime_error("short write " + tmp.string());
    }
    fs::rename(tmp, path);
}

inline void write_file_atomic(const std::filesystem::path& path, const std::string& text) {
    write_file_atomic(path, text.data(), text.size());
}

// Versioned tag->matrix container with a trailing checksum. All checkpoints
// (policies, critics, discriminators, optimizer state) are stored this way,
// so save->load->forward is bit-identical.
class BlobWriter {
public:
    void add(const std::string& tag, const Mat& m) {
        put_u32(static_cast<std::uint32_t>(tag.size()));
        buf_.insert(buf_.end(), tag.begin(), tag.end());
        put_u32(static_cast<std::uint32_t>(m.rows));
        put_u32(static_cast<std::uint32_t>(m.cols));
        const auto* p = reinterpret_cast<const unsigned char*>(m.a.data());
        buf_.insert(buf_.end(), p, p + m.a.size() * sizeof(double));
    }

    void add_scalar(const std::string& tag, double v) {
        Mat m(1, 1);
        m(0, 0) = v;
        add(tag, m);
    }

    void write(const std::filesystem::path& path) const {
        std::vector<unsigned char> out;
        out.insert(out.end(), kMagic, kMagic + 8);
        out.insert(out.end(), buf_.begin(), buf_.end());
        const std::uint64_t h = fnv1a64(out.data(), out.size());
        for (int i = 0; i < 8; ++i) out.push_back(static_cast<unsigned char>((h >> (8 * i)) & 0xff));
        write_file_atomic(path, out.data(), out.size());
    }

    static constexpr const char kMagic[9] = "NATADV01";

private:
    void put_u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xff));
    }

    std::vector<unsigned char> buf_;
};

class BlobReader {
public:
    static BlobReader from_file(const std::filesystem::path& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw NotFoundError("checkpoint not found: " + path.string());
        std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        if (bytes.size() < 16 || std::memcmp(bytes.data(), BlobWriter::kMagic, 8) != 0)
            throw CorruptionError("bad checkpoint header: " + path.string());
        std::uint64_t stored = 0;
        for (int i = 0; i < 8; ++i)
            stored |= static_cast<std::uint64_t>(bytes[bytes.size() - 8 + i]) << (8 * i);
        if (fnv1a64(bytes.data(), bytes.size() - 8) != stored)
            throw CorruptionError("checkpoint checksum mismatch: " + path.string());
        BlobReader r;
        std::size_t pos = 8;
        const std::size_t end = bytes.size() - 8;
        while (pos < end) {
            const std::uint32_t tag_len = get_u32(bytes, pos);
            std::string tag(reinterpret_cast<const char*>(bytes.data() + pos), tag_len);
            pos += tag_len;
            const std::uint32_t rows = get_u32(bytes, pos);
            const std::uint32_t cols = get_u32(bytes, pos);
            Mat m(static_cast<int>(rows), static_cast<int>(cols));
            const std::size_t nbytes = m.a.size() * sizeof(double);
            if (pos + nbytes > end) throw CorruptionError("truncated checkpoint: " + path.string());
            std::memcpy(m.a.data(), bytes.data() + pos, nbytes);
            pos += nbytes;
            r.mats_.emplace(std::move(tag), std::move(m));
        }
        return r;
    }

    bool has(const std::string& tag) const { return mats_.count(tag) > 0; }

    const Mat& mat(const std::string& tag) const {
        auto it = mats_.find(tag);
        if (it == mats_.end()) throw CorruptionError("checkpoint missing field: " + tag);
        return it->second;
    }

    double scalar(const std::string& tag) const { return mat(tag)(0, 0); }

private:
    static std::uint32_t get_u32(const std::vector<unsigned char>& b, std::size_t& pos) {
        if (pos + 4 > b.size()) throw CorruptionError("truncated checkpoint");
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[pos + i]) << (8 * i);
        pos += 4;
        return v;
    }

    std::map<std::string, Mat> mats_;
};

inline void blob_add_mlp(BlobWriter& w, const std::string& prefix, const Mlp& net, bool with_moments) {
    Mat sizes(1, static_cast<int>(net.sizes.size()));
    for (std::size_t i = 0; i < net.sizes.size(); ++i) sizes(0, static_cast<int>(i)) = net.sizes[i];
    w.add(prefix + ".sizes", sizes);
    for (std::size_t l = 0; l < net.w.size(); ++l) {
        const std::string ls = std::to_string(l);
        w.add(prefix + ".w" + ls, net.w[l].value);
        w.add(prefix + ".b" + ls, net.b[l].value);
        if (with_moments && net.w[l].m.size() > 0) {
            w.add(prefix + ".w" + ls + ".m", net.w[l].m);
            w.add(prefix + ".w" + ls + ".v", net.w[l].v);
            w.add(prefix + ".b" + ls + ".m", net.b[l].m);
            w.add(prefix + ".b" + ls + ".v", net.b[l].v);
        }
    }
}

inline Mlp blob_read_mlp(const BlobReader& r, const std::string& prefix) {
    const Mat& sizes = r.mat(prefix + ".sizes");
    Mlp net;
    for (int i = 0; i < sizes.cols; ++i) net.sizes.push_back(static_cast<int>(sizes(0, i)));
    for (std::size_t l = 0; l + 1 < net.sizes.size(); ++l) {
        const std::string ls = std::to_string(l);
        net.w.emplace_back(r.mat(prefix + ".w" + ls));
        net.b.emplace_back(r.mat(prefix + ".b" + ls));
        if (r.has(prefix + ".w" + ls + ".m")) {
            net.w[l].m = r.mat(prefix + ".w" + ls + ".m");
            net.w[l].v = r.mat(prefix + ".w" + ls + ".v");
            net.b[l].m = r.mat(prefix + ".b" + ls + ".m");
            net.b[l].v = r.mat(prefix + ".b" + ls + ".v");
        }
    }
    return net;
}

inline void save_policy(const std::filesystem::path& path, const Mlp& mean_net, const Param& log_std,
                        const Adam* adam = nullptr) {
    BlobWriter w;
    blob_add_mlp(w, "mean", mean_net, adam != nullptr);
    w.add("log_std", log_std.value);
    if (adam) {
        if (log_std.m.size() > 0) {
            w.add("log_std.m", log_std.m);
            w.add("log_std.v", log_std.v);
        }
        w.add_scalar("adam.t", static_cast<double>(adam->t));
    }
    w.write(path);
}

struct GaussianPolicy;

inline void save_policy(const std::filesystem::path& path, const GaussianPolicy& p, const Adam* adam = nullptr) {
    save_policy(path, p.mean_net, p.log_std, adam);
}

inline GaussianPolicy load_policy(const std::filesystem::path& path, Adam* adam = nullptr) {
    BlobReader r = BlobReader::from_file(path);
    GaussianPolicy p;
    p.mean_net = blob_read_mlp(r, "mean");
    p.log_std = Param(r.mat("log_std"));
    if (r.has("log_std.m")) {
        p.log_std.m = r.mat("log_std.m");
        p.log_std.v = r.mat("log_std.v");
    }
    if (adam && r.has("adam.t")) adam->t = static_cast<std::int64_t>(r.scalar("adam.t"));
    return p;
}

inline void save_mlp(const std::filesystem::path& path, const Mlp& net, const Adam* adam = nullptr) {
    BlobWriter w;
    blob_add_mlp(w, "net", net, adam != nullptr);
    if (adam) w.add_scalar("adam.t", static_cast<double>(adam->t));
    w.write(path);
}

inline Mlp load_mlp(const std::filesystem::path& path, Adam* adam = nullptr) {
    BlobReader r = BlobReader::from_file(path);
    if (adam && r.has("adam.t")) adam->t = static_cast<std::int64_t>(r.scalar("adam.t"));
    return blob_read_mlp(r, "net");
}

} // namespace natadv
