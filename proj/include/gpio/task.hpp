#pragma once

#include <string>

namespace gpio {

enum class Task { Node, Link, Graph };

Task parse_task(const std::string& s);
std::string to_string(Task task);

}  // namespace gpio
