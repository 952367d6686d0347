#pragma once

#include <stdexcept>
#include <string>

namespace dhtchain {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

#define DHTCHAIN_DEFINE_ERROR(name)                                          \
    struct name : Error {                                                     \
        explicit name(const std::string& msg) : Error(#name ": " + msg) {}    \
    }

DHTCHAIN_DEFINE_ERROR(WidthMismatch);
DHTCHAIN_DEFINE_ERROR(KeyPruned);
DHTCHAIN_DEFINE_ERROR(RootMismatch);
DHTCHAIN_DEFINE_ERROR(InternalInconsistency);
DHTCHAIN_DEFINE_ERROR(WriteToPrunedKey);
DHTCHAIN_DEFINE_ERROR(CodecError);
DHTCHAIN_DEFINE_ERROR(Unfillable);
DHTCHAIN_DEFINE_ERROR(NotAuthority);
DHTCHAIN_DEFINE_ERROR(LookupFailed);
DHTCHAIN_DEFINE_ERROR(BranchTooLong);
DHTCHAIN_DEFINE_ERROR(SyncError);
DHTCHAIN_DEFINE_ERROR(ConfigError);

#undef DHTCHAIN_DEFINE_ERROR

}  // namespace dhtchain
