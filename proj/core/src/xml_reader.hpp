#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace pens::xml {

using Attributes = std::vector<std::pair<std::string, std::string>>;

/// Receiver for the event stream. Offsets are byte offsets into the input.
class Handler {
 public:
  virtual ~Handler() = default;
  virtual void start_element(std::string_view name, const Attributes& attrs,
                             std::size_t offset) = 0;
  virtual void end_element(std::string_view name, std::size_t offset) = 0;
  virtual void text(std::string_view decoded, std::size_t offset) = 0;
};

/// Streams `input` through `handler`. Handles elements, attributes, the five
/// predefined entities and numeric character references, CDATA, comments,
/// processing instructions and a DOCTYPE without internal subset. Throws
/// ParseError (with byte offset) on malformed input.
void parse(std::string_view input, Handler& handler);

}  // namespace pens::xml
