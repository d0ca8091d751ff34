#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hirec/core.hpp"

namespace hirec {

/// Pipeline stage. ROOT routes to departments, DEPARTMENT refines within a
/// specialty, ITEM consolidates and weighs the final list.
enum class Layer : uint8_t {
    ROOT = 0,
    DEPARTMENT = 1,
    ITEM = 2,
};

inline const char* to_string(Layer layer) {
    switch (layer) {
        case Layer::ROOT: return "root";
        case Layer::DEPARTMENT: return "department";
        case Layer::ITEM: return "item";
    }
    return "root";
}

/// One reasoning-history entry, carried across layers within a single
/// query. Records are append-only and step strictly increases in creation
/// order; memory is scoped to one recommend() call and discarded after.
struct MemoryRecord {
    int step = 0;
    Layer layer = Layer::ROOT;
    std::string summary;
    std::vector<std::string> flags;
    std::vector<DocumentId> doc_ids;

    bool operator==(const MemoryRecord&) const = default;
};

}  // namespace hirec
