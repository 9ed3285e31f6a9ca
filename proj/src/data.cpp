// Copyright 2026 The PoseNet Authors
// SPDX-License-Identifier: Apache-2.0

#include "posenet/data.hpp"

#include <algorithm>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace posenet {

std::string task_kind_name(TaskKind kind) {
  switch (kind) {
    case TaskKind::kCopy:
      return "copy";
    case TaskKind::kReverse:
      return "reverse";
    case TaskKind::kRotate:
      return "rotate";
  }
  return "unknown";
}

TaskKind parse_task_kind(const std::string& name) {
  if (name == "copy") return TaskKind::kCopy;
  if (name == "reverse") return TaskKind::kReverse;
  if (name == "rotate") return TaskKind::kRotate;
  throw std::invalid_argument("unknown task kind '" + name + "'");
}

void TaskSpec::validate() const {
  if (symbols < 1) throw std::invalid_argument("task needs at least one symbol");
  if (min_length < 1 || max_length < min_length) throw std::invalid_argument("task lengths must satisfy 1 <= min <= max");
}

Sequence transduce(const TaskSpec& spec, const Sequence& src) {
  Sequence tgt;
  switch (spec.kind) {
    case TaskKind::kCopy:
      tgt = src;
      break;
    case TaskKind::kReverse:
      tgt.assign(src.rbegin(), src.rend());
      break;
    case TaskKind::kRotate:
      tgt.reserve(src.size());
      for (auto s : src) {
        const auto shifted = ((s - token::kFirstSymbol + spec.rotate) % spec.symbols + spec.symbols) % spec.symbols;
        tgt.push_back(shifted + token::kFirstSymbol);
      }
      break;
  }
  return tgt;
}

Example generate_pair(const TaskSpec& spec, Rng& rng) {
  const auto length = rng.between(spec.min_length, spec.max_length);
  Sequence src(static_cast<std::size_t>(length));
  for (auto& s : src) s = token::kFirstSymbol + static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(spec.symbols)));
  auto tgt = transduce(spec, src);
  return {std::move(src), std::move(tgt)};
}

std::vector<Example> generate_corpus(const TaskSpec& spec, std::int64_t count, std::uint64_t stream) {
  spec.validate();
  Rng rng(derive_seed(spec.seed, stream));
  std::vector<Example> out;
  out.reserve(static_cast<std::size_t>(std::max<std::int64_t>(0, count)));
  for (std::int64_t i = 0; i < count; ++i) out.push_back(generate_pair(spec, rng));
  return out;
}

Batch make_batch(const std::vector<Example>& examples, std::int64_t max_length) {
  if (examples.empty()) throw std::invalid_argument("make_batch needs at least one example");
  std::size_t src_len = 0;
  std::size_t tgt_len = 0;
  for (const auto& ex : examples) {
    src_len = std::max(src_len, ex.src.size() + 1);
    tgt_len = std::max(tgt_len, ex.tgt.size() + 1);
  }
  if (static_cast<std::int64_t>(std::max(src_len, tgt_len)) > max_length) {
    throw std::invalid_argument("sequence of length " + std::to_string(std::max(src_len, tgt_len) - 1) +
                                " plus EOS exceeds max_length " + std::to_string(max_length));
  }
  const auto rows = static_cast<std::int64_t>(examples.size());
  Batch batch{IdMatrix(rows, static_cast<std::int64_t>(src_len), token::kPad),
              IdMatrix(rows, static_cast<std::int64_t>(tgt_len), token::kPad), {}, {}};
  for (std::int64_t r = 0; r < rows; ++r) {
    const auto& ex = examples[static_cast<std::size_t>(r)];
    for (std::size_t c = 0; c < ex.src.size(); ++c) batch.src(r, static_cast<std::int64_t>(c)) = ex.src[c];
    batch.src(r, static_cast<std::int64_t>(ex.src.size())) = token::kEos;
    for (std::size_t c = 0; c < ex.tgt.size(); ++c) batch.tgt(r, static_cast<std::int64_t>(c)) = ex.tgt[c];
    batch.tgt(r, static_cast<std::int64_t>(ex.tgt.size())) = token::kEos;
  }
  batch.src_mask = pad_mask(batch.src);
  batch.tgt_mask = pad_mask(batch.tgt);
  return batch;
}

Sequence strip(std::span<const std::int64_t> row) {
  Sequence out;
  for (auto id : row) {
    if (id == token::kEos || id == token::kPad) break;
    out.push_back(id);
  }
  return out;
}

double overlap_rate(const std::vector<Example>& a, const std::vector<Example>& b) {
  if (a.empty()) return 0.0;
  std::set<Sequence> seen;
  for (const auto& ex : b) seen.insert(ex.src);
  const auto hits = std::count_if(a.begin(), a.end(), [&](const Example& ex) { return seen.contains(ex.src); });
  return static_cast<double>(hits) / static_cast<double>(a.size());
}

std::string format_ids(const Sequence& ids) {
  std::string out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i) out += ' ';
    out += std::to_string(ids[i]);
  }
  return out;
}

Sequence parse_ids(const std::string& line) {
  std::istringstream is(line);
  Sequence out;
  std::string word;
  while (is >> word) {
    std::size_t used = 0;
    long long v = 0;
    try {
      v = std::stoll(word, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != word.size()) throw std::invalid_argument("bad token id '" + word + "'");
    out.push_back(v);
  }
  return out;
}

void write_corpus(std::ostream& os, const std::vector<Example>& corpus) {
  for (const auto& ex : corpus) os << format_ids(ex.src) << '\t' << format_ids(ex.tgt) << '\n';
}

std::vector<Example> read_corpus(std::istream& is) {
  std::vector<Example> out;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw std::invalid_argument("corpus line without a TAB separator");
    out.push_back({parse_ids(line.substr(0, tab)), parse_ids(line.substr(tab + 1))});
  }
  return out;
}

}  // namespace posenet
