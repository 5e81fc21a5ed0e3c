#pragma once

#include <stdexcept>
#include <string>

namespace cso {

#define CSO_DEFINE_ERROR(Name)                                        \
    struct Name : std::runtime_error {                                \
        explicit Name(const std::string& msg)                         \
            : std::runtime_error(std::string(#Name ": ") + msg) {}    \
    }

// tensor / nn ops
CSO_DEFINE_ERROR(ShapeMismatch);
CSO_DEFINE_ERROR(OddSpatialDim);
CSO_DEFINE_ERROR(IndexOutOfRange);
CSO_DEFINE_ERROR(BadSpatialDims);

// sprites
CSO_DEFINE_ERROR(BadMagic);
CSO_DEFINE_ERROR(Truncated);
CSO_DEFINE_ERROR(EmptyPool);

// files
CSO_DEFINE_ERROR(IoError);
CSO_DEFINE_ERROR(CorruptHeader);
CSO_DEFINE_ERROR(ArchMismatch);

// probe
CSO_DEFINE_ERROR(OutOfBounds);
CSO_DEFINE_ERROR(RegimeMismatch);

// cli
CSO_DEFINE_ERROR(UsageError);
CSO_DEFINE_ERROR(ConfigError);

#undef CSO_DEFINE_ERROR

}  // namespace cso
