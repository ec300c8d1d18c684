#pragma once

// Deterministic stand-ins for the language-model calls. The mock backend is
// built from these; tests also call them directly as oracles.

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "cotalk/semantic_model.hpp"

namespace cotalk::gateway::mock {

/// Drops "then", "furthermore", "next" (except in "next to") and the "and"
/// of "and then"; collapses whitespace. Idempotent.
std::string denoise(std::string_view text);

/// Rule grammar over colour/amount/size/shape/material/location lexicons.
/// Returns the reply in the extraction JSON schema.
nlohmann::json extract(std::string_view caption);

/// Sentence union. A later sentence replaces every earlier sentence it
/// conflicts with (same object, same single-valued attribute kind, different
/// value); exact repeats are dropped.
std::string merge_sequential(std::string_view accumulated, std::string_view addition);

/// Sorts the captions, then folds merge_sequential over them.
std::string merge_parallel(std::span<const std::string> captions);

/// Five "Qn: ..." lines: padding questions first, then one per leading unit.
std::string questions(std::string_view caption);

inline constexpr std::string_view kFixtureMagic = "COTALK-FIXTURE\n";

/// Builds an audio fixture blob carrying `transcript`.
std::string make_audio_fixture(std::string_view transcript);

/// Reads the transcript back; throws MalformedResponse for other blobs.
std::string read_audio_fixture(std::string_view blob);

}  // namespace cotalk::gateway::mock
