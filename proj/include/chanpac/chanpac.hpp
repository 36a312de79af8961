#ifndef CHANPAC_CHANPAC_HPP
#define CHANPAC_CHANPAC_HPP

#include "chanpac/bound.hpp"
#include "chanpac/channel.hpp"
#include "chanpac/data.hpp"
#include "chanpac/edgesim.hpp"
#include "chanpac/io.hpp"
#include "chanpac/network.hpp"
#include "chanpac/oracle.hpp"
#include "chanpac/rng.hpp"
#include "chanpac/tensor.hpp"
#include "chanpac/variational.hpp"

#endif
