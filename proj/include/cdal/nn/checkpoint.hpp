#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "cdal/core/errors.hpp"
#include "cdal/core/tensor.hpp"
#include "cdal/nn/adam.hpp"
#include "cdal/nn/layers.hpp"

namespace cdal::nn {

// Minimal named-tensor container (little-endian). Layout:
//   "CDALCKPT" | u32 version | u64 record_count | records...
// record: u32 name_len | name | u8 dtype | u32 rank | i64 dims[] | raw bytes
// dtype: 0 = f32, 1 = f64, 2 = byte blob, 3 = i64 scalar array.
inline constexpr char kCkptMagic[8] = {'C', 'D', 'A', 'L', 'C', 'K', 'P', 'T'};
inline constexpr uint32_t kCkptVersion = 1;

namespace detail {
template <typename T>
void write_pod(std::ostream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <typename T>
T read_pod(std::istream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw IoError("checkpoint: truncated file");
    return v;
}
template <typename Real>
constexpr uint8_t dtype_code() {
    return sizeof(Real) == 4 ? 0 : 1;
}
}  // namespace detail

class CheckpointWriter {
public:
    explicit CheckpointWriter(const std::string& path) : path_(path), out_(path, std::ios::binary) {
        if (!out_) throw IoError("checkpoint: cannot open for write: " + path);
        out_.write(kCkptMagic, sizeof(kCkptMagic));
        detail::write_pod(out_, kCkptVersion);
        detail::write_pod(out_, count_);  // patched on close
    }

    template <typename Real>
    void add_tensor(const std::string& name, const Tensor<Real>& t) {
        begin_record(name, detail::dtype_code<Real>(), t.shape);
        out_.write(reinterpret_cast<const char*>(t.ptr()), static_cast<std::streamsize>(t.numel() * sizeof(Real)));
        ++count_;
    }

    void add_blob(const std::string& name, const std::string& bytes) {
        begin_record(name, 2, {static_cast<int>(bytes.size())});
        out_.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        ++count_;
    }

    void add_i64(const std::string& name, int64_t v) {
        begin_record(name, 3, {1});
        detail::write_pod(out_, v);
        ++count_;
    }

    void close() {
        out_.seekp(sizeof(kCkptMagic) + sizeof(uint32_t), std::ios::beg);
        detail::write_pod(out_, count_);
        out_.close();
        if (!out_) throw IoError("checkpoint: write failed: " + path_);
    }

private:
    void begin_record(const std::string& name, uint8_t dtype, const std::vector<int>& dims) {
        detail::write_pod(out_, static_cast<uint32_t>(name.size()));
        out_.write(name.data(), static_cast<std::streamsize>(name.size()));
        detail::write_pod(out_, dtype);
        detail::write_pod(out_, static_cast<uint32_t>(dims.size()));
        for (int d : dims) detail::write_pod(out_, static_cast<int64_t>(d));
    }

    std::string path_;
    std::ofstream out_;
    uint64_t count_ = 0;
};

struct CheckpointRecord {
    uint8_t dtype = 0;
    std::vector<int> dims;
    std::vector<unsigned char> raw;

    int64_t numel() const {
        int64_t n = 1;
        for (int d : dims) n *= d;
        return n;
    }

    template <typename Real>
    Tensor<Real> as_tensor() const {
        if (dtype != detail::dtype_code<Real>())
            throw IoError("checkpoint: dtype mismatch for stored tensor");
        Tensor<Real> t(dims);
        std::memcpy(t.ptr(), raw.data(), raw.size());
        return t;
    }

    std::string as_blob() const {
        if (dtype != 2) throw IoError("checkpoint: record is not a blob");
        return std::string(reinterpret_cast<const char*>(raw.data()), raw.size());
    }

    int64_t as_i64() const {
        if (dtype != 3 || raw.size() != sizeof(int64_t))
            throw IoError("checkpoint: record is not an i64");
        int64_t v;
        std::memcpy(&v, raw.data(), sizeof(v));
        return v;
    }
};

class Checkpoint {
public:
    explicit Checkpoint(const std::string& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw IoError("checkpoint: cannot open: " + path);
        char magic[8];
        in.read(magic, sizeof(magic));
        if (!in || std::memcmp(magic, kCkptMagic, sizeof(magic)) != 0)
            throw IoError("checkpoint: bad magic in " + path);
        const uint32_t version = detail::read_pod<uint32_t>(in);
        if (version != kCkptVersion)
            throw IoError("checkpoint: unsupported version " + std::to_string(version));
        const uint64_t count = detail::read_pod<uint64_t>(in);
        for (uint64_t i = 0; i < count; ++i) {
            const uint32_t name_len = detail::read_pod<uint32_t>(in);
            std::string name(name_len, '\0');
            in.read(name.data(), name_len);
            CheckpointRecord rec;
            rec.dtype = detail::read_pod<uint8_t>(in);
            const uint32_t rank = detail::read_pod<uint32_t>(in);
            for (uint32_t r = 0; r < rank; ++r)
                rec.dims.push_back(static_cast<int>(detail::read_pod<int64_t>(in)));
            const size_t elem = rec.dtype == 0 ? 4 : rec.dtype == 1 ? 8 : rec.dtype == 2 ? 1 : 8;
            rec.raw.resize(static_cast<size_t>(rec.numel()) * elem);
            in.read(reinterpret_cast<char*>(rec.raw.data()), static_cast<std::streamsize>(rec.raw.size()));
            if (!in) throw IoError("checkpoint: truncated record " + name);
            records_.emplace(std::move(name), std::move(rec));
        }
    }

    bool has(const std::string& name) const { return records_.count(name) != 0; }

    const CheckpointRecord& at(const std::string& name) const {
        auto it = records_.find(name);
        if (it == records_.end()) throw IoError("checkpoint: missing record: " + name);
        return it->second;
    }

    const std::map<std::string, CheckpointRecord>& records() const { return records_; }

private:
    std::map<std::string, CheckpointRecord> records_;
};

// ---- parameter / optimizer helpers -------------------------------------

template <typename Real>
void save_params(CheckpointWriter& w, const std::string& prefix, ParamList<Real>& params) {
    for (auto& p : params) w.add_tensor(prefix + "/" + p.name, *p.value);
}

template <typename Real>
void load_params(const Checkpoint& ckpt, const std::string& prefix, ParamList<Real>& params) {
    for (auto& p : params) {
        Tensor<Real> t = ckpt.at(prefix + "/" + p.name).template as_tensor<Real>();
        if (t.shape != p.value->shape)
            throw IoError("checkpoint: shape mismatch for " + prefix + "/" + p.name + ": stored " +
                          t.shape_str() + " vs model " + p.value->shape_str());
        *p.value = std::move(t);
    }
}

template <typename Real>
void save_adam(CheckpointWriter& w, const std::string& prefix, const Adam<Real>& opt) {
    w.add_i64(prefix + "/adam.t", opt.t);
    for (size_t i = 0; i < opt.m.size(); ++i) {
        w.add_tensor(prefix + "/adam.m/" + opt.names[i], opt.m[i]);
        w.add_tensor(prefix + "/adam.v/" + opt.names[i], opt.v[i]);
    }
}

template <typename Real>
void load_adam(const Checkpoint& ckpt, const std::string& prefix, Adam<Real>& opt,
               ParamList<Real>& params) {
    opt.attach(params);
    opt.t = ckpt.at(prefix + "/adam.t").as_i64();
    for (size_t i = 0; i < opt.m.size(); ++i) {
        opt.m[i] = ckpt.at(prefix + "/adam.m/" + opt.names[i]).template as_tensor<Real>();
        opt.v[i] = ckpt.at(prefix + "/adam.v/" + opt.names[i]).template as_tensor<Real>();
    }
}

}  // namespace cdal::nn
