#include "featvec/common.hpp"
int main(){return 0;}
