#include "tbs/parallel.hpp"

#include <atomic>
#include <cstdlib>
#include <string>

namespace tbs {

namespace {

int initial_threads() {
    if (const char* env = std::getenv("TBS_THREADS")) {
        try {
            const int n = std::stoi(env);
            if (n > 0) return n;
        } catch (const std::exception&) {
        }
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

std::atomic<int>& thread_setting() {
    static std::atomic<int> value{initial_threads()};
    return value;
}

}  // namespace

int default_threads() { return thread_setting().load(); }

void set_default_threads(int threads) {
    if (threads < 1) throw Error(ErrorKind::Configuration, "thread count must be at least 1");
    thread_setting().store(threads);
}

}  // namespace tbs
