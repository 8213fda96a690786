#pragma once

#include "ditra/task.hpp"

namespace ditra {

// Token id layout: the task alphabet occupies [0, base); control tokens
// follow. PAD doubles as the "empty slot" id when building prefix rows.
struct VocabLayout {
  int base = 32;

  int pad() const { return base; }
  int bos() const { return base + 1; }
  int eos() const { return base + 2; }
  int tag_a() const { return base + 3; }
  int tag_b() const { return base + 4; }
  int ttl() const { return base + 5; }
  int match() const { return base + 6; }
  int mismatch() const { return base + 7; }
  int size() const { return base + 8; }

  int tag(Domain d) const { return d == Domain::A ? tag_a() : tag_b(); }
  bool is_task_token(int id) const { return id >= 0 && id < base; }
};

}  // namespace ditra
