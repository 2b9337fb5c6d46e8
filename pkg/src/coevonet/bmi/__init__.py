from coevonet.bmi.bmi_coevolving_network import BmiCoevolvingNetwork
