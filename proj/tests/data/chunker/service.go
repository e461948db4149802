package service

import "fmt"

type Server struct {
	port int
}

func (s *Server) Start() error {
	fmt.Println("start")
	return nil
}

func helper() int { return 1 }
