// Copyright 2026 The PoseNet Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "posenet/model.hpp"
#include "posenet/random.hpp"
#include "posenet/tensor.hpp"

namespace posenet {

using Sequence = std::vector<std::int64_t>;

/// PAD=0, EOS=1, BOS=2, UNK=3; symbols occupy 4..size-1.
struct Vocab {
  std::int64_t size = 20;

  std::int64_t symbol_count() const { return size - token::kFirstSymbol; }
  bool is_symbol(std::int64_t id) const { return id >= token::kFirstSymbol && id < size; }
};

enum class TaskKind { kCopy, kReverse, kRotate };

std::string task_kind_name(TaskKind kind);
TaskKind parse_task_kind(const std::string& name);

struct TaskSpec {
  TaskKind kind = TaskKind::kReverse;
  std::int64_t rotate = 1;  // shift for kRotate
  std::int64_t symbols = 16;
  std::int64_t min_length = 4;
  std::int64_t max_length = 16;
  std::uint64_t seed = 1;

  void validate() const;
};

struct Example {
  Sequence src;
  Sequence tgt;
};

/// Applies the task's transduction to a symbol sequence.
Sequence transduce(const TaskSpec& spec, const Sequence& src);

/// Random source of uniform length in [min_length, max_length] and its target.
Example generate_pair(const TaskSpec& spec, Rng& rng);

/// `count` examples from an independent stream of (spec.seed, stream).
std::vector<Example> generate_corpus(const TaskSpec& spec, std::int64_t count, std::uint64_t stream);

inline constexpr std::uint64_t kTrainStream = 0x7261696e;  // "rain"
inline constexpr std::uint64_t kEvalStream = 0x6576616c;   // "eval"

struct Batch {
  IdMatrix src;
  IdMatrix tgt;
  Mask src_mask;
  Mask tgt_mask;
};

/// Appends EOS to every sequence and right-pads with PAD to the batch maxima.
/// Throws if a sequence plus EOS exceeds max_length.
Batch make_batch(const std::vector<Example>& examples, std::int64_t max_length);

/// Row r with everything from the first EOS/PAD onward removed.
Sequence strip(std::span<const std::int64_t> row);

/// Fraction of `a`'s sources that also occur as a source in `b`.
double overlap_rate(const std::vector<Example>& a, const std::vector<Example>& b);

/// Corpus dump: one example per line, "src ids<TAB>tgt ids", ids space-separated.
void write_corpus(std::ostream& os, const std::vector<Example>& corpus);
std::vector<Example> read_corpus(std::istream& is);

std::string format_ids(const Sequence& ids);
Sequence parse_ids(const std::string& line);

}  // namespace posenet
