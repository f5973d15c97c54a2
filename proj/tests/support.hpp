#pragma once

#include <doctest.h>

#include "rpl/error.hpp"

// Checks that `expr` throws rpl::Error of the given kind.
#define CHECK_ERROR_KIND(expr, expected_kind)                                  \
  do {                                                                         \
    bool rpl_thrown_ = false;                                                  \
    try {                                                                      \
      (void)(expr);                                                            \
    } catch (const rpl::Error& rpl_e_) {                                       \
      rpl_thrown_ = true;                                                      \
      CHECK_MESSAGE(rpl_e_.kind() == (expected_kind), rpl_e_.what());          \
    }                                                                          \
    CHECK_MESSAGE(rpl_thrown_, "expected rpl::Error from " #expr);             \
  } while (false)
