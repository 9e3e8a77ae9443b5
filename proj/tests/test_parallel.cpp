// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 isacsim contributors

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>
