#ifndef XCLP_XCLP_HPP_
#define XCLP_XCLP_HPP_

// Umbrella header for the whole library.

#include "xclp/bus.hpp"
#include "xclp/data_model.hpp"
#include "xclp/fixed_point.hpp"
#include "xclp/graph_engine.hpp"
#include "xclp/lsh.hpp"
#include "xclp/ot.hpp"
#include "xclp/paillier.hpp"
#include "xclp/plaintext_oracle.hpp"
#include "xclp/rng.hpp"
#include "xclp/secure_hamming.hpp"
#include "xclp/secure_rowsums.hpp"
#include "xclp/ssl_pipeline.hpp"
#include "xclp/xclp_protocol.hpp"

#endif  // XCLP_XCLP_HPP_
