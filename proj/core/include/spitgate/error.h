#pragma once

#include <stdexcept>
#include <string>

namespace spitgate {

// Base for every failure raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// File system failures: missing, unreadable or unwritable paths.
class IoError : public Error {
 public:
  using Error::Error;
};

// Malformed input bytes or text (pcap, SIP, RTP, pattern and prototype files).
class FormatError : public Error {
 public:
  using Error::Error;
};

// A well-formed request the library refuses: bad arguments, unsupported
// payload types, duplicate patterns.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

}  // namespace spitgate
