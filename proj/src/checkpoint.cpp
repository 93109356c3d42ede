// SPDX-License-Identifier: Apache-2.0
#include "unipix/checkpoint.hpp"

#include <bit>
#include <cstring>

#include <json.hpp>

#include "unipix/error.hpp"
#include "unipix/io.hpp"

namespace unipix {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[4] = {'U', 'N', 'I', 'M'};
constexpr std::uint8_t kDtypeF32 = 0;

class Writer {
public:
    template <typename V>
    void put(V v) {
        const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
        buf.insert(buf.end(), p, p + sizeof(V));
    }
    void bytes(const void* data, std::size_t n) {
        const auto* p = static_cast<const std::uint8_t*>(data);
        buf.insert(buf.end(), p, p + n);
    }
    std::vector<std::uint8_t> buf;
};

class Reader {
public:
    Reader(const std::uint8_t* data, std::size_t size) : data_(data), size_(size) {}

    template <typename V>
    V get() {
        V v;
        std::memcpy(&v, take(sizeof(V)), sizeof(V));
        return v;
    }
    const std::uint8_t* take(std::size_t n) {
        if (n > size_ - pos_) fail(ErrorCode::format_error, "checkpoint is truncated");
        const std::uint8_t* p = data_ + pos_;
        pos_ += n;
        return p;
    }
    std::size_t pos() const { return pos_; }

private:
    const std::uint8_t* data_;
    std::size_t size_;
    std::size_t pos_ = 0;
};

std::uint64_t element_count(const std::vector<std::uint64_t>& dims) {
    std::uint64_t n = 1;
    for (auto d : dims) n *= d;
    return n;
}

}  // namespace

const NamedTensor* Checkpoint::find(const std::string& name) const {
    for (const auto& t : tensors)
        if (t.name == name) return &t;
    return nullptr;
}

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ckpt) {
    nlohmann::json header;
    header["config"] = nlohmann::json::parse(config_to_json(ckpt.config));
    header["step"] = ckpt.step;
    header["rng_state"] = ckpt.rng_state;
    header["adam_step"] = ckpt.adam_step;
    const std::string header_text = header.dump();

    Writer w;
    w.bytes(kMagic, 4);
    w.put<std::uint32_t>(kCheckpointVersion);
    w.put<std::uint64_t>(header_text.size());
    w.bytes(header_text.data(), header_text.size());
    w.put<std::uint32_t>(static_cast<std::uint32_t>(ckpt.tensors.size()));
    std::uint64_t offset = 0;
    for (const auto& t : ckpt.tensors) {
        if (element_count(t.dims) != t.data.size()) {
            fail(ErrorCode::shape_mismatch, "tensor '" + t.name + "' dims do not match its data");
        }
        w.put<std::uint32_t>(static_cast<std::uint32_t>(t.name.size()));
        w.bytes(t.name.data(), t.name.size());
        w.put<std::uint8_t>(kDtypeF32);
        w.put<std::uint32_t>(static_cast<std::uint32_t>(t.dims.size()));
        for (auto d : t.dims) w.put<std::uint64_t>(d);
        w.put<std::uint64_t>(offset);
        offset += t.data.size() * sizeof(float);
    }
    for (const auto& t : ckpt.tensors) w.bytes(t.data.data(), t.data.size() * sizeof(float));
    w.put<std::uint32_t>(crc32(w.buf));
    return std::move(w.buf);
}

Checkpoint deserialize_checkpoint(const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() < 4 + 4 + 8 + 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
        fail(ErrorCode::format_error, "not a checkpoint file (bad magic)");
    }
    Reader r(bytes.data(), bytes.size());
    r.take(4);
    const auto version = r.get<std::uint32_t>();
    if (version != kCheckpointVersion) {
        fail(ErrorCode::version_mismatch, "checkpoint version " + std::to_string(version) + ", expected " +
                                              std::to_string(kCheckpointVersion));
    }
    const std::size_t body = bytes.size() - 4;
    std::uint32_t stored_crc;
    std::memcpy(&stored_crc, bytes.data() + body, 4);
    if (crc32(std::span<const std::uint8_t>(bytes.data(), body)) != stored_crc) {
        fail(ErrorCode::checksum_mismatch, "checkpoint checksum mismatch");
    }

    Reader in(bytes.data(), body);
    in.take(8);
    const auto header_len = in.get<std::uint64_t>();
    const auto* header_bytes = in.take(header_len);
    Checkpoint ckpt;
    try {
        const auto header =
            nlohmann::json::parse(std::string(reinterpret_cast<const char*>(header_bytes), header_len));
        ckpt.config = config_from_json(header.at("config").dump());
        ckpt.step = header.at("step").get<std::uint64_t>();
        ckpt.rng_state = header.at("rng_state").get<std::string>();
        ckpt.adam_step = header.at("adam_step").get<std::uint64_t>();
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::format_error, std::string("bad checkpoint header: ") + e.what());
    }

    const auto count = in.get<std::uint32_t>();
    std::vector<std::uint64_t> offsets;
    for (std::uint32_t i = 0; i < count; ++i) {
        NamedTensor t;
        const auto name_len = in.get<std::uint32_t>();
        const auto* name = in.take(name_len);
        t.name.assign(reinterpret_cast<const char*>(name), name_len);
        if (in.get<std::uint8_t>() != kDtypeF32) fail(ErrorCode::format_error, "unsupported tensor dtype");
        const auto ndim = in.get<std::uint32_t>();
        for (std::uint32_t d = 0; d < ndim; ++d) t.dims.push_back(in.get<std::uint64_t>());
        offsets.push_back(in.get<std::uint64_t>());
        ckpt.tensors.push_back(std::move(t));
    }
    const std::size_t payload = in.pos();
    const std::size_t payload_size = body - payload;
    for (std::size_t i = 0; i < ckpt.tensors.size(); ++i) {
        auto& t = ckpt.tensors[i];
        const std::uint64_t n = element_count(t.dims);
        if (offsets[i] > payload_size || n * sizeof(float) > payload_size - offsets[i]) {
            fail(ErrorCode::format_error, "tensor '" + t.name + "' lies outside the payload");
        }
        t.data.resize(n);
        std::memcpy(t.data.data(), bytes.data() + payload + offsets[i], n * sizeof(float));
    }
    return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
    write_file_atomic(path, serialize_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) fail(ErrorCode::missing_file, "checkpoint not found: " + path.string());
    return deserialize_checkpoint(read_file_bytes(path));
}

}  // namespace unipix
