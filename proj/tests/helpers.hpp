#pragma once

#include <fstream>
#include <sstream>
#include <string>

#include "incentive_lab/error.hpp"

namespace test_helpers {

inline std::string data_path(const std::string& name) { return std::string(INCENTIVE_LAB_TEST_DATA) + "/" + name; }

inline std::string slurp(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

template <class F>
incentive_lab::ErrorCode error_code(F&& fn) {
    try {
        fn();
    } catch (const incentive_lab::LabError& e) {
        return e.code();
    }
    throw std::logic_error("expected a LabError");
}

}  // namespace test_helpers
