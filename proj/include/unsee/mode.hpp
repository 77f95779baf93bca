#pragma once

namespace unsee {

enum class Mode { Train, Eval };

}  // namespace unsee
