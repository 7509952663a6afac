#include "cfn/log.hpp"

#include <atomic>
#include <cstdlib>
#include <iostream>
#include <mutex>
#include <string>

#include "cfn/error.hpp"

namespace cfn::log {

namespace {

Level from_env() {
    const char* env = std::getenv("CFN_LOG");
    if (env == nullptr || *env == '\0') return Level::Info;
    try {
        return parse_level(env);
    } catch (const ParameterError&) {
        std::cerr << "[warn] ignoring unknown CFN_LOG value '" << env << "'\n";
        return Level::Info;
    }
}

std::atomic<int>& current() {
    static std::atomic<int> l{static_cast<int>(from_env())};
    return l;
}

std::mutex& sink_mutex() {
    static std::mutex m;
    return m;
}

void emit(Level at, std::string_view tag, std::string_view msg) {
    if (static_cast<int>(at) > current().load()) return;
    std::lock_guard lock(sink_mutex());
    std::cerr << '[' << tag << "] " << msg << '\n';
}

}  // namespace

Level level() { return static_cast<Level>(current().load()); }

void set_level(Level l) { current().store(static_cast<int>(l)); }

Level parse_level(std::string_view s) {
    if (s == "error") return Level::Error;
    if (s == "info") return Level::Info;
    if (s == "debug") return Level::Debug;
    throw ParameterError("unknown log level '" + std::string(s) + "'");
}

void error(std::string_view msg) { emit(Level::Error, "error", msg); }
void warn(std::string_view msg) { emit(Level::Info, "warn", msg); }
void info(std::string_view msg) { emit(Level::Info, "info", msg); }
void debug(std::string_view msg) { emit(Level::Debug, "debug", msg); }

}  // namespace cfn::log
