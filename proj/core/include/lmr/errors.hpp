// Copyright (c) 2026, The LMR Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace lmr {

// Every failure raised by the library derives from Error so callers can
// catch one type and still dispatch on the concrete category.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

#define LMR_DEFINE_ERROR(Name)                   \
    class Name : public Error {                  \
    public:                                      \
        using Error::Error;                      \
    }

LMR_DEFINE_ERROR(IoError);
LMR_DEFINE_ERROR(FormatError);
LMR_DEFINE_ERROR(TruncationError);
LMR_DEFINE_ERROR(ValidationError);
LMR_DEFINE_ERROR(DuplicationError);
LMR_DEFINE_ERROR(CoverageError);
LMR_DEFINE_ERROR(ShapeError);
LMR_DEFINE_ERROR(ConfigError);
LMR_DEFINE_ERROR(TrainingError);
LMR_DEFINE_ERROR(StateError);

#undef LMR_DEFINE_ERROR

}  // namespace lmr
