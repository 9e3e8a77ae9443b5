// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 isacsim contributors

int main() { return 0; }
