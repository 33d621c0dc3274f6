#pragma once

#include <map>
#include <optional>
#include <string>
#include <variant>

#include <json.hpp>

#include "lrmpc/tensor.hpp"

namespace lrmpc {

// LRMT tensor container.
//
//   magic "LRMT" | version u32 LE | header length u64 LE | UTF-8 JSON header |
//   raw little-endian payloads
//
// The JSON header maps tensor name -> {"shape":[...], "dtype":"f64"|"u64",
// "offset":N} with offsets relative to the end of the header. A reserved
// "__meta__" key carries container-level fields (sharing scheme, party id,
// fixed-point config, layer tags); tensor names must not collide with it.
class Container {
public:
    using Tensor = std::variant<RingTensor, RealTensor>;

    void put(const std::string& name, RingTensor t);
    void put(const std::string& name, RealTensor t);

    bool has(const std::string& name) const { return tensors_.count(name) != 0; }
    const RingTensor& ring(const std::string& name) const;
    const RealTensor& real(const std::string& name) const;
    std::vector<std::string> names() const;

    nlohmann::json& meta() { return meta_; }
    const nlohmann::json& meta() const { return meta_; }

    void save(const std::string& path) const;
    static Container load(const std::string& path);

    // Serialized bytes are deterministic: sorted tensor names, compact JSON.
    std::vector<u8> serialize() const;
    static Container deserialize(const std::vector<u8>& bytes);

private:
    std::map<std::string, Tensor> tensors_;
    nlohmann::json meta_ = nlohmann::json::object();
};

} // namespace lrmpc
