#pragma once

#include <array>
#include <cstddef>
#include <string_view>

namespace cfn {

inline constexpr std::size_t kDiscreteEmotions = 26;
inline constexpr std::size_t kContinuousEmotions = 3;
inline constexpr std::size_t kEmotionDims = kDiscreteEmotions + kContinuousEmotions;

inline constexpr std::array<std::string_view, kDiscreteEmotions> kDiscreteEmotionNames = {
    "Peace",        "Affection",   "Esteem",        "Anticipation", "Engagement",
    "Confidence",   "Happiness",   "Pleasure",      "Excitement",   "Surprise",
    "Sympathy",     "Doubt",       "Disconnection", "Fatigue",      "Embarrassment",
    "Yearning",     "Disapproval", "Aversion",      "Annoyance",    "Anger",
    "Sensitivity",  "Sadness",     "Disquietment",  "Fear",         "Pain",
    "Suffering",
};

inline constexpr std::array<std::string_view, kContinuousEmotions> kContinuousEmotionNames = {
    "Valence", "Arousal", "Dominance"};

}  // namespace cfn
