#pragma once

#include <map>
#include <string>

#include "rffsei/tensor.hpp"

namespace rffsei {

// Checkpoint container: a name -> tensor map serialized as
//   "RFFCKPT1\n"
//   repeated { u16 name length, name bytes, u8 rank, u32 dims..., f64 data... }
// Integers and floats are little-endian. Entries are written in map order so
// identical contents produce identical bytes.
struct Checkpoint {
    std::map<std::string, Tensor> tensors;

    void save(const std::string& path) const;
    static Checkpoint load(const std::string& path);
};

}  // namespace rffsei
