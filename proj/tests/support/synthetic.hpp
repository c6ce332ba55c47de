#pragma once

#include <cstdint>

#include "eduvl/corpus.hpp"

namespace eduvl::synth {

// 3-6 sentences of 1-3 EDUs each, one sentence forced to 3 EDUs. References
// are contiguous EDU subsets: up to two whole sentences plus a strict prefix
// of the 3-EDU sentence, with light token mutation.
Corpus theorem_corpus(int documents, uint64_t seed);

// 4-6 sentences of 2-3 EDUs. Reference EDUs come from the latter half of the
// document and use a separate word pool from the filler EDUs, so the LEAD
// baseline is weak and the ranking is learnable.
Corpus overfit_corpus(int documents, uint64_t seed);

// Reference lengths cycle through 1..5 EDUs.
Corpus heterogeneous_corpus(int documents, uint64_t seed, Split split);

// Every document is one 5-token EDU repeated four times; duplicates expose
// the trigram filter.
Corpus duplicate_edu_corpus(int documents, uint64_t seed);

}  // namespace eduvl::synth
