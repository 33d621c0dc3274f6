#include "lrmpc/container.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace lrmpc {

namespace {

constexpr char kMagic[4] = {'L', 'R', 'M', 'T'};
constexpr u32 kVersion = 1;

void put_u32(std::vector<u8>& out, u32 v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<u8>(v >> (8 * i)));
}
void put_u64(std::vector<u8>& out, u64 v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<u8>(v >> (8 * i)));
}
u32 get_u32(const u8* p) {
    u32 v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<u32>(p[i]) << (8 * i);
    return v;
}
u64 get_u64(const u8* p) {
    u64 v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<u64>(p[i]) << (8 * i);
    return v;
}

} // namespace

void Container::put(const std::string& name, RingTensor t) {
    if (name == "__meta__") throw std::invalid_argument("__meta__ is a reserved tensor name");
    tensors_.insert_or_assign(name, std::move(t));
}

void Container::put(const std::string& name, RealTensor t) {
    if (name == "__meta__") throw std::invalid_argument("__meta__ is a reserved tensor name");
    tensors_.insert_or_assign(name, std::move(t));
}

const RingTensor& Container::ring(const std::string& name) const {
    auto it = tensors_.find(name);
    if (it == tensors_.end()) throw std::out_of_range("container has no tensor " + name);
    if (auto* t = std::get_if<RingTensor>(&it->second)) return *t;
    throw std::runtime_error("tensor " + name + " is f64, expected u64");
}

const RealTensor& Container::real(const std::string& name) const {
    auto it = tensors_.find(name);
    if (it == tensors_.end()) throw std::out_of_range("container has no tensor " + name);
    if (auto* t = std::get_if<RealTensor>(&it->second)) return *t;
    throw std::runtime_error("tensor " + name + " is u64, expected f64");
}

std::vector<std::string> Container::names() const {
    std::vector<std::string> out;
    for (const auto& [k, v] : tensors_) out.push_back(k);
    return out;
}

std::vector<u8> Container::serialize() const {
    nlohmann::json header = nlohmann::json::object();
    if (!meta_.empty()) header["__meta__"] = meta_;

    // payload offsets are relative to the end of the header
    u64 offset = 0;
    std::vector<u8> payload;
    for (const auto& [name, var] : tensors_) {
        nlohmann::json desc;
        if (const auto* rt = std::get_if<RingTensor>(&var)) {
            desc["shape"] = rt->shape;
            desc["dtype"] = "u64";
            desc["offset"] = offset;
            for (u64 v : rt->data) put_u64(payload, v);
            offset += rt->size() * 8;
        } else {
            const auto& dt = std::get<RealTensor>(var);
            desc["shape"] = dt.shape;
            desc["dtype"] = "f64";
            desc["offset"] = offset;
            for (double v : dt.data) {
                u64 bits;
                std::memcpy(&bits, &v, 8);
                put_u64(payload, bits);
            }
            offset += dt.size() * 8;
        }
        header[name] = std::move(desc);
    }

    std::string hdr = header.dump(); // std::map keys -> sorted, stable bytes
    std::vector<u8> out;
    out.insert(out.end(), kMagic, kMagic + 4);
    put_u32(out, kVersion);
    put_u64(out, hdr.size());
    out.insert(out.end(), hdr.begin(), hdr.end());
    out.insert(out.end(), payload.begin(), payload.end());
    return out;
}

Container Container::deserialize(const std::vector<u8>& bytes) {
    if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, 4) != 0)
        throw std::runtime_error("not an LRMT container");
    u32 version = get_u32(bytes.data() + 4);
    if (version != kVersion) throw std::runtime_error("unsupported LRMT version");
    u64 hdr_len = get_u64(bytes.data() + 8);
    if (16 + hdr_len > bytes.size()) throw std::runtime_error("truncated LRMT header");

    nlohmann::json header =
        nlohmann::json::parse(bytes.begin() + 16, bytes.begin() + 16 + hdr_len);
    const u8* base = bytes.data() + 16 + hdr_len;
    u64 payload_len = bytes.size() - 16 - hdr_len;

    Container c;
    for (auto it = header.begin(); it != header.end(); ++it) {
        if (it.key() == "__meta__") {
            c.meta_ = it.value();
            continue;
        }
        const auto& desc = it.value();
        Shape shape = desc.at("shape").get<Shape>();
        u64 offset = desc.at("offset").get<u64>();
        std::string dtype = desc.at("dtype").get<std::string>();
        std::size_t n = shape_elems(shape);
        if (offset + n * 8 > payload_len) throw std::runtime_error("LRMT payload out of bounds");
        if (dtype == "u64") {
            RingTensor t(shape);
            for (std::size_t i = 0; i < n; ++i) t.data[i] = get_u64(base + offset + 8 * i);
            c.tensors_.insert_or_assign(it.key(), std::move(t));
        } else if (dtype == "f64") {
            RealTensor t(shape);
            for (std::size_t i = 0; i < n; ++i) {
                u64 bits = get_u64(base + offset + 8 * i);
                double v;
                std::memcpy(&v, &bits, 8);
                t.data[i] = v;
            }
            c.tensors_.insert_or_assign(it.key(), std::move(t));
        } else {
            throw std::runtime_error("unknown dtype " + dtype);
        }
    }
    return c;
}

void Container::save(const std::string& path) const {
    auto bytes = serialize();
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open " + path + " for writing");
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

Container Container::load(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path);
    std::vector<u8> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return deserialize(bytes);
}

} // namespace lrmpc
