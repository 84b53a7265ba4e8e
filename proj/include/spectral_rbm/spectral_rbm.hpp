#ifndef SPECTRAL_RBM_SPECTRAL_RBM_HPP
#define SPECTRAL_RBM_SPECTRAL_RBM_HPP

#include "spectral_rbm/core.hpp"
#include "spectral_rbm/linalg.hpp"
#include "spectral_rbm/operator_family.hpp"
#include "spectral_rbm/perturbation.hpp"
#include "spectral_rbm/reduced_basis.hpp"
#include "spectral_rbm/certifier.hpp"
#include "spectral_rbm/schrodinger.hpp"
#include "spectral_rbm/io.hpp"
#include "spectral_rbm/parallel.hpp"

#endif  // SPECTRAL_RBM_SPECTRAL_RBM_HPP
