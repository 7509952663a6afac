#pragma once

#include <string_view>

// Minimal leveled logging to stderr. The level comes from CFN_LOG
// (error, info, debug; default info) unless set explicitly.
namespace cfn::log {

enum class Level { Error = 0, Info = 1, Debug = 2 };

Level level();
void set_level(Level l);
// Parses "error" / "info" / "debug"; throws ParameterError otherwise.
Level parse_level(std::string_view s);

void error(std::string_view msg);
// Warnings are shown at the info level.
void warn(std::string_view msg);
void info(std::string_view msg);
void debug(std::string_view msg);

}  // namespace cfn::log
